#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "l2cl/data.hpp"
#include "l2cl/eval.hpp"
#include "l2cl/graph.hpp"
#include "l2cl/losses.hpp"
#include "l2cl/matrix.hpp"
#include "l2cl/model.hpp"
#include "l2cl/optim.hpp"

namespace l2cl {

struct TrainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    Scheme scheme = Scheme::U0_I1;
    int layers = -1;  // -1: scheme depth (3 for the plain-BPR baseline)
    int64_t dim = 64;
    double lr = 1e-3;
    int64_t batch_size = 4096;
    CLHyper hyper;
    int patience = 10;
    int eval_every = 1;
    int max_epochs = 200;
    uint64_t seed_init = 42;
    uint64_t seed_sample = 7;
    bool early_stopping = true;
    ReadoutMode readout_mode = ReadoutMode::MeanLayers;
    int precision = 32;  // 32 or 64
    int workers = 1;
    bool debug_checks = false;

    int effective_layers() const {
        const int need = required_depth(scheme);
        if (layers >= 0) return std::max(layers, need);
        return scheme == Scheme::None ? 3 : need;
    }
};

struct EpochRecord {
    int epoch = 0;  // 1-based
    double loss_total = 0.0;
    double loss_bpr = 0.0;
    double loss_cl = 0.0;   // raw CL value (summed over batches)
    double loss_reg = 0.0;  // raw squared-norm value
    double wall_ms = 0.0;   // training portion only (evaluation excluded)
    bool has_val = false;
    double val_ndcg10 = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    int best_epoch = -1;
    double best_metric = 0.0;
    std::string stop_reason;
};

struct TrainCallbacks {
    std::function<void(const EpochRecord&)> on_epoch;
};

// Stop once the metric has not strictly improved for `patience` consecutive
// evaluations; best epoch is the argmax with ties to the earliest.
inline std::pair<bool, int> early_stop(std::span<const std::pair<int, double>> val_records,
                                       int patience) {
    if (val_records.empty()) throw std::invalid_argument("early_stop: no validation records");
    size_t best = 0;
    for (size_t k = 1; k < val_records.size(); ++k) {
        if (val_records[k].second > val_records[best].second) best = k;
    }
    const bool stop = val_records.size() - 1 - best >= static_cast<size_t>(patience);
    return {stop, val_records[best].first};
}

// Full mutable state of a run; checkpointing it makes resume bit-identical
// to an uninterrupted run (single worker).
template <class S>
struct TrainerState {
    Mat<S> table;
    AdamState<S> adam;
    int64_t epoch = 0;
    std::string rng_state;
    Mat<S> best_table;
    int64_t best_epoch = -1;
    double best_metric = 0.0;
    std::vector<std::pair<int, double>> val_records;
    uint64_t config_hash = 0;
    int32_t num_users = 0;
    int32_t num_items = 0;
};

template <class S>
struct TrainResult {
    Mat<S> best_table;  // checkpoint of the best validation epoch
    TrainHistory history;
    TrainerState<S> state;
};

// Multi-task loop: per epoch, ceil(|train|/B) independently resampled
// batches; per batch forward to the scheme depth, joint loss, exact backward
// to E^(0), lazy Adam. Validation NDCG@10 drives best-model selection and
// early stopping.
template <class S>
TrainResult<S> train(const TrainConfig& cfg, const SplitDataset& split,
                     const PropagationOperator& op, const TrainerState<S>* resume = nullptr,
                     const TrainCallbacks* callbacks = nullptr) {
    if (cfg.hyper.tau <= 0) throw TrainError("temperature must be > 0");
    if (cfg.batch_size < 1) throw TrainError("batch size must be >= 1");
    const int32_t num_users = split.num_users();
    const int L = cfg.effective_layers();
    const int64_t n_rows = int64_t(num_users) + split.num_items();

    TrainResult<S> out;
    TrainerState<S>& st = out.state;
    std::mt19937_64 rng;
    if (resume) {
        st = *resume;
        std::istringstream is(st.rng_state);
        is >> rng;
        if (!is) throw TrainError("corrupt sampler state in resume checkpoint");
    } else {
        st.table = init_embeddings<S>(num_users, split.num_items(), cfg.dim, cfg.seed_init);
        st.adam = AdamState<S>(n_rows, cfg.dim, cfg.lr);
        rng.seed(mix_seed(cfg.seed_sample, 0));
    }
    st.num_users = num_users;
    st.num_items = split.num_items();

    const int64_t batches_per_epoch =
        (split.train.num_pairs() + cfg.batch_size - 1) / cfg.batch_size;

    LayerStack<S> stack;
    GradAccumulator<S> acc(cfg.dim);
    Mat<S> d_e0, scratch;
    TrainBatch batch;
    const std::vector<int64_t> val_ks = {10};

    for (int epoch = static_cast<int>(st.epoch) + 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        EpochRecord rec;
        rec.epoch = epoch;

        for (int64_t b = 0; b < batches_per_epoch; ++b) {
            sample_bpr_batch(split.train, cfg.batch_size, rng, batch);
            if (cfg.debug_checks) {
                for (size_t t = 0; t < batch.size(); ++t) {
                    if (split.train.has(batch.user[t], batch.item_neg[t]))
                        throw TrainError("sampled negative present in train adjacency");
                }
            }
            forward(st.table, op, L, stack, cfg.readout_mode, cfg.workers);
            acc.clear();
            const auto loss = total_loss(stack, num_users, batch, cfg.scheme, cfg.hyper, acc);
            if (!std::isfinite(loss.total)) {
                throw TrainError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(b) + " (bpr=" + std::to_string(loss.bpr) +
                                 ", cl=" + std::to_string(loss.cl) +
                                 ", reg=" + std::to_string(loss.reg) + ")");
            }
            backward(op, L, acc, cfg.readout_mode, d_e0, scratch, cfg.workers);
            const auto rows = collect_touched_rows(d_e0);
            adam_step(st.adam, st.table, rows, d_e0);

            rec.loss_bpr += loss.bpr;
            rec.loss_cl += loss.cl;
            rec.loss_reg += loss.reg;
            rec.loss_total += loss.total;
        }
        rec.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        st.epoch = epoch;

        bool stop = false;
        if (epoch % cfg.eval_every == 0) {
            forward(st.table, op, L, stack, cfg.readout_mode, cfg.workers);
            const auto ev = evaluate(stack.readout, split, Phase::Validation, val_ks, cfg.workers);
            rec.has_val = true;
            rec.val_ndcg10 = ev.metric(10, /*ndcg=*/true);
            st.val_records.emplace_back(epoch, rec.val_ndcg10);

            auto [should_stop, best_epoch] = early_stop(st.val_records, cfg.patience);
            if (best_epoch != st.best_epoch) {
                // A change of argmax means the current epoch strictly improved.
                st.best_epoch = best_epoch;
                st.best_metric = rec.val_ndcg10;
                st.best_table = st.table;
            }
            stop = cfg.early_stopping && should_stop;
        }
        out.history.epochs.push_back(rec);
        if (callbacks && callbacks->on_epoch) callbacks->on_epoch(rec);
        if (stop) {
            out.history.stop_reason = "early_stop";
            break;
        }
    }

    if (out.history.stop_reason.empty()) out.history.stop_reason = "max_epochs";
    if (st.best_epoch < 0) {
        // Never evaluated: fall back to the final table.
        st.best_epoch = st.epoch;
        st.best_table = st.table;
    }
    out.history.best_epoch = static_cast<int>(st.best_epoch);
    out.history.best_metric = st.best_metric;
    out.best_table = st.best_table;

    std::ostringstream os;
    os << rng;
    st.rng_state = os.str();
    return out;
}

}  // namespace l2cl
