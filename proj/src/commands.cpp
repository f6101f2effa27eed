#include "l2cl/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "l2cl/checkpoint.hpp"
#include "l2cl/eval.hpp"
#include "l2cl/graph.hpp"
#include "l2cl/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace l2cl {

namespace {

const std::vector<int64_t> kEvalKs = {10, 20, 50};

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw std::runtime_error("cannot write: " + path);
    out << content;
    if (!out) throw std::runtime_error("short write: " + path);
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string fmt_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", x);
    return buf;
}

std::string hex64(uint64_t x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(x));
    return buf;
}

void apply_overrides(TrainConfig& cfg, const Overrides& o) {
    if (o.seed) {
        cfg.seed_init = *o.seed;
        cfg.seed_sample = mix_seed(*o.seed, 1);
    }
    if (o.workers) cfg.workers = *o.workers;
    if (o.precision) {
        if (*o.precision != 32 && *o.precision != 64)
            throw std::runtime_error("precision must be 32 or 64");
        cfg.precision = *o.precision;
    }
}

TrainConfig load_config(const std::string& path, const Overrides& overrides) {
    auto result = make_train_config(parse_config_file(path));
    if (!result.ok()) {
        std::string msg = "invalid config " + path + ":";
        for (const auto& e : result.errors) msg += "\n  - " + e;
        throw std::runtime_error(msg);
    }
    apply_overrides(result.config, overrides);
    return result.config;
}

json config_snapshot(const TrainConfig& cfg) {
    json j = json::object();
    std::istringstream in(canonical_config(cfg));
    std::string line;
    while (std::getline(in, line)) {
        size_t eq = line.find(" = ");
        j[line.substr(0, eq)] = line.substr(eq + 3);
    }
    return j;
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const TrainConfig& cfg, const std::string& data_dir, uint64_t fingerprint,
                    const std::vector<std::string>& outputs) {
    json j;
    j["artifact_version"] = kArtifactVersion;
    j["command"] = command;
    j["config"] = config_snapshot(cfg);
    j["config_hash"] = hex64(config_hash(cfg));
    j["data_dir"] = data_dir;
    j["dataset_fingerprint"] = hex64(fingerprint);
    j["outputs"] = outputs;
    write_json(out_dir + "/manifest.json", j);
}

json metrics_json(const EvalResult& ev) {
    json arr = json::array();
    for (const auto& p : ev.per_k) {
        arr.push_back({{"k", p.k}, {"recall", p.recall}, {"ndcg", p.ndcg}});
    }
    return arr;
}

void append_metrics_csv(std::ostringstream& csv, const std::string& phase,
                        const std::string& group, const EvalResult& ev) {
    for (const auto& p : ev.per_k) {
        csv << phase << ',' << p.k << ",recall," << group << ',' << fmt_double(p.recall) << '\n';
        csv << phase << ',' << p.k << ",ndcg," << group << ',' << fmt_double(p.ndcg) << '\n';
    }
}

// ---- prepared-data directory ----

InteractionSet read_pairs_tsv(const std::string& path, int32_t num_users, int32_t num_items) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open split file: " + path);
    std::vector<std::pair<int32_t, int32_t>> pairs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        int32_t u, i;
        if (std::sscanf(line.c_str(), "%d\t%d", &u, &i) != 2)
            throw std::runtime_error("malformed split line in " + path + ": " + line);
        pairs.emplace_back(u, i);
    }
    return make_interaction_set(num_users, num_items, std::move(pairs));
}

}  // namespace

PreparedData load_prepared(const std::string& data_dir) {
    std::ifstream meta_in(data_dir + "/meta.json");
    if (!meta_in) throw std::runtime_error("missing meta.json in data dir: " + data_dir);
    json meta = json::parse(meta_in);

    const int32_t m = meta.at("num_users").get<int32_t>();
    const int32_t n = meta.at("num_items").get<int32_t>();

    PreparedData d;
    d.split.train = read_pairs_tsv(data_dir + "/train.tsv", m, n);
    d.split.valid = read_pairs_tsv(data_dir + "/valid.tsv", m, n);
    d.split.test = read_pairs_tsv(data_dir + "/test.tsv", m, n);
    d.split.split_seed = meta.at("split_seed").get<uint64_t>();

    uint64_t hashes[4] = {fnv1a64_file(data_dir + "/train.tsv"),
                          fnv1a64_file(data_dir + "/valid.tsv"),
                          fnv1a64_file(data_dir + "/test.tsv"),
                          fnv1a64_file(data_dir + "/meta.json")};
    d.fingerprint = fnv1a64(hashes, sizeof(hashes));
    return d;
}

// ---- prepare ----

int cmd_prepare(const PrepareArgs& args) {
    auto records = load_interactions(args.input, args.columns);

    std::vector<RawPair> pairs;
    if (args.theta.has_value()) {
        pairs = threshold_implicit(records, *args.theta);
    } else {
        pairs.reserve(records.size());
        for (const auto& r : records) pairs.emplace_back(r.user, r.item);
    }
    if (args.k_user > 0 || args.k_item > 0) {
        pairs = k_core_filter(pairs, std::max(args.k_user, 1), std::max(args.k_item, 1));
    }

    auto remapped = remap_ids(pairs);
    auto split = split_user_based(remapped.iset, args.ratios, args.seed);

    fs::create_directories(args.out_dir);
    auto write_split = [&](const std::string& name, const InteractionSet& s) {
        std::ostringstream os;
        for (int32_t u = 0; u < s.num_users; ++u)
            for (int32_t i : s.items_of(u)) os << u << '\t' << i << '\n';
        write_text(args.out_dir + "/" + name, os.str());
    };
    write_split("train.tsv", split.train);
    write_split("valid.tsv", split.valid);
    write_split("test.tsv", split.test);

    auto write_map = [&](const std::string& name, const std::vector<std::string>& ids) {
        std::ostringstream os;
        for (size_t k = 0; k < ids.size(); ++k) os << ids[k] << '\t' << k << '\n';
        write_text(args.out_dir + "/" + name, os.str());
    };
    write_map("user_map.tsv", remapped.maps.user_of_index);
    write_map("item_map.tsv", remapped.maps.item_of_index);

    const auto& iset = remapped.iset;
    json meta;
    meta["num_users"] = iset.num_users;
    meta["num_items"] = iset.num_items;
    meta["num_interactions"] = iset.num_pairs();
    meta["density"] = static_cast<double>(iset.num_pairs()) /
                      (static_cast<double>(iset.num_users) * iset.num_items);
    meta["train_pairs"] = split.train.num_pairs();
    meta["valid_pairs"] = split.valid.num_pairs();
    meta["test_pairs"] = split.test.num_pairs();
    meta["split_seed"] = args.seed;
    meta["ratios"] = args.ratios;
    if (args.theta.has_value()) {
        meta["theta"] = *args.theta;
    } else {
        meta["theta"] = nullptr;
    }
    meta["k_user"] = args.k_user;
    meta["k_item"] = args.k_item;
    write_json(args.out_dir + "/meta.json", meta);

    std::cout << "prepared " << iset.num_users << " users, " << iset.num_items << " items, "
              << iset.num_pairs() << " interactions (train/valid/test " << split.train.num_pairs()
              << "/" << split.valid.num_pairs() << "/" << split.test.num_pairs() << ") -> "
              << args.out_dir << "\n";
    return 0;
}

// ---- train ----

namespace {

json epoch_record_json(const EpochRecord& r) {
    json j;
    j["epoch"] = r.epoch;
    j["loss_total"] = r.loss_total;
    j["loss_bpr"] = r.loss_bpr;
    j["loss_cl"] = r.loss_cl;
    j["loss_reg"] = r.loss_reg;
    j["wall_ms"] = r.wall_ms;
    if (r.has_val) j["val_ndcg10"] = r.val_ndcg10;
    return j;
}

template <class S>
void run_train_cmd(const TrainConfig& cfg, const PreparedData& data, const TrainArgs& args) {
    PropagationOperator op;
    if (!args.operator_cache.empty() && fs::exists(args.operator_cache)) {
        op = load_operator(args.operator_cache);
    } else {
        op = build_operator(data.split.train);
        if (!args.operator_cache.empty()) save_operator(args.operator_cache, op);
    }

    std::ofstream hist(args.out_dir + "/history.jsonl", std::ios::trunc);
    if (!hist) throw std::runtime_error("cannot write history: " + args.out_dir);
    TrainCallbacks cb;
    cb.on_epoch = [&](const EpochRecord& r) { hist << epoch_record_json(r).dump() << "\n"; };

    auto result = train<S>(cfg, data.split, op, nullptr, &cb);
    hist.close();

    result.state.config_hash = config_hash(cfg);
    save_checkpoint(args.out_dir + "/checkpoint.bin", result.state);

    LayerStack<S> stack;
    forward(result.best_table, op, cfg.effective_layers(), stack, cfg.readout_mode, cfg.workers);
    const auto ev = evaluate(stack.readout, data.split, Phase::Test, kEvalKs, cfg.workers);

    json rep;
    rep["phase"] = "test";
    rep["users_evaluated"] = ev.users_evaluated;
    rep["best_epoch"] = result.history.best_epoch;
    rep["best_val_ndcg10"] = result.history.best_metric;
    rep["stop_reason"] = result.history.stop_reason;
    rep["metrics"] = metrics_json(ev);
    write_json(args.out_dir + "/report.json", rep);

    std::ostringstream csv;
    csv << "phase,k,metric,group,value\n";
    append_metrics_csv(csv, "test", "", ev);
    write_text(args.out_dir + "/report.csv", csv.str());

    write_manifest(args.out_dir, "train", cfg, args.data_dir, data.fingerprint,
                   {"checkpoint.bin", "history.jsonl", "report.json", "report.csv"});

    std::cout << "trained " << scheme_name(cfg.scheme) << " (L=" << cfg.effective_layers()
              << "), stopped after " << result.history.epochs.size() << " epochs ("
              << result.history.stop_reason << "), best epoch " << result.history.best_epoch
              << "\n";
    for (const auto& p : ev.per_k) {
        std::cout << "  test recall@" << p.k << " = " << fmt_double(p.recall) << "  ndcg@" << p.k
                  << " = " << fmt_double(p.ndcg) << "\n";
    }
}

}  // namespace

int cmd_train(const TrainArgs& args) {
    TrainConfig cfg = load_config(args.config_path, args.overrides);
    PreparedData data = load_prepared(args.data_dir);
    fs::create_directories(args.out_dir);
    if (cfg.precision == 64) {
        run_train_cmd<double>(cfg, data, args);
    } else {
        run_train_cmd<float>(cfg, data, args);
    }
    return 0;
}

// ---- eval ----

namespace {

template <class S>
void run_eval_cmd(const TrainConfig& cfg, const PreparedData& data, const EvalArgs& args) {
    auto state = load_checkpoint<S>(args.checkpoint);
    if (state.num_users != data.split.num_users() || state.num_items != data.split.num_items())
        throw std::runtime_error("checkpoint user/item counts do not match the data dir");

    Phase phase;
    if (args.phase == "test") {
        phase = Phase::Test;
    } else if (args.phase == "val" || args.phase == "validation") {
        phase = Phase::Validation;
    } else {
        throw std::runtime_error("unknown phase '" + args.phase + "' (expected val or test)");
    }

    PropagationOperator op = build_operator(data.split.train);
    LayerStack<S> stack;
    forward(state.best_table, op, cfg.effective_layers(), stack, cfg.readout_mode, cfg.workers);
    const auto ev = evaluate(stack.readout, data.split, phase, kEvalKs, cfg.workers);

    json rep;
    rep["phase"] = args.phase;
    rep["users_evaluated"] = ev.users_evaluated;
    rep["metrics"] = metrics_json(ev);

    std::ostringstream csv;
    csv << "phase,k,metric,group,value\n";
    append_metrics_csv(csv, args.phase, "", ev);

    if (args.sparsity_groups) {
        const InteractionSet& truth = phase == Phase::Validation ? data.split.valid
                                                                 : data.split.test;
        std::vector<int32_t> eval_users;
        for (int32_t u = 0; u < data.split.num_users(); ++u)
            if (truth.degree(u) > 0) eval_users.push_back(u);
        auto groups = sparsity_groups(data.split.train, eval_users, 5);
        json garr = json::array();
        for (size_t g = 0; g < groups.groups.size(); ++g) {
            const auto& members = groups.groups[g];
            auto gev = evaluate(stack.readout, data.split, phase, kEvalKs, cfg.workers,
                                std::span<const int32_t>(members));
            int64_t train_interactions = 0;
            for (int32_t u : members) train_interactions += data.split.train.degree(u);
            garr.push_back({{"group", g + 1},
                            {"users", members.size()},
                            {"train_interactions", train_interactions},
                            {"metrics", metrics_json(gev)}});
            append_metrics_csv(csv, args.phase, "G" + std::to_string(g + 1), gev);
        }
        rep["groups"] = garr;
    }

    fs::create_directories(args.out_dir);
    write_json(args.out_dir + "/report.json", rep);
    write_text(args.out_dir + "/report.csv", csv.str());
    write_manifest(args.out_dir, "eval", cfg, args.data_dir, data.fingerprint,
                   {"report.json", "report.csv"});

    std::cout << "evaluated " << ev.users_evaluated << " users on " << args.phase << "\n";
    for (const auto& p : ev.per_k) {
        std::cout << "  recall@" << p.k << " = " << fmt_double(p.recall) << "  ndcg@" << p.k
                  << " = " << fmt_double(p.ndcg) << "\n";
    }
}

}  // namespace

int cmd_eval(const EvalArgs& args) {
    TrainConfig cfg = load_config(args.config_path, args.overrides);
    PreparedData data = load_prepared(args.data_dir);
    const int prec = checkpoint_precision(args.checkpoint);
    if (prec == 64) {
        run_eval_cmd<double>(cfg, data, args);
    } else {
        run_eval_cmd<float>(cfg, data, args);
    }
    return 0;
}

// ---- grid ----

namespace {

struct VariantRow {
    std::string name;
    int layers = 0;
    int best_epoch = -1;
    EvalResult test;
};

template <class S>
VariantRow run_variant(TrainConfig cfg, const SplitDataset& split,
                       const PropagationOperator& op) {
    auto result = train<S>(cfg, split, op);
    LayerStack<S> stack;
    forward(result.best_table, op, cfg.effective_layers(), stack, cfg.readout_mode, cfg.workers);
    VariantRow row;
    row.name = scheme_name(cfg.scheme);
    row.layers = cfg.effective_layers();
    row.best_epoch = result.history.best_epoch;
    row.test = evaluate(stack.readout, split, Phase::Test, kEvalKs, cfg.workers);
    return row;
}

json variant_rows_json(const std::vector<VariantRow>& rows) {
    json arr = json::array();
    for (const auto& r : rows) {
        arr.push_back({{"scheme", r.name},
                       {"layers", r.layers},
                       {"best_epoch", r.best_epoch},
                       {"metrics", metrics_json(r.test)}});
    }
    return arr;
}

std::string variant_rows_csv(const std::vector<VariantRow>& rows) {
    std::ostringstream csv;
    csv << "scheme,layers,best_epoch";
    for (int64_t k : kEvalKs) csv << ",recall@" << k << ",ndcg@" << k;
    csv << '\n';
    for (const auto& r : rows) {
        csv << r.name << ',' << r.layers << ',' << r.best_epoch;
        for (int64_t k : kEvalKs)
            csv << ',' << fmt_double(r.test.metric(static_cast<int>(k), false)) << ','
                << fmt_double(r.test.metric(static_cast<int>(k), true));
        csv << '\n';
    }
    return csv.str();
}

void print_variant_rows(const std::vector<VariantRow>& rows) {
    std::printf("%-14s %6s %10s %11s %9s\n", "scheme", "layers", "best_epoch", "recall@10",
                "ndcg@10");
    for (const auto& r : rows) {
        std::printf("%-14s %6d %10d %11.5f %9.5f\n", r.name.c_str(), r.layers, r.best_epoch,
                    r.test.metric(10, false), r.test.metric(10, true));
    }
}

template <class S>
std::vector<VariantRow> run_grid(const TrainConfig& base, const SplitDataset& split) {
    PropagationOperator op = build_operator(split.train);
    std::vector<VariantRow> rows;

    TrainConfig baseline = base;
    baseline.scheme = Scheme::None;
    baseline.layers = 3;
    baseline.hyper.lambda1 = 0.0;
    rows.push_back(run_variant<S>(baseline, split, op));

    for (Scheme s : {Scheme::U0_I0, Scheme::U1_I1, Scheme::U0_I1, Scheme::U0_U2,
                     Scheme::U0_SumU123}) {
        TrainConfig cfg = base;
        cfg.scheme = s;
        cfg.layers = -1;  // scheme depth
        rows.push_back(run_variant<S>(cfg, split, op));
    }
    return rows;
}

}  // namespace

int cmd_grid(const GridArgs& args) {
    TrainConfig cfg = load_config(args.config_path, args.overrides);
    PreparedData data = load_prepared(args.data_dir);
    fs::create_directories(args.out_dir);

    std::vector<VariantRow> rows;
    if (cfg.precision == 64) {
        rows = run_grid<double>(cfg, data.split);
    } else {
        rows = run_grid<float>(cfg, data.split);
    }

    json rep;
    rep["rows"] = variant_rows_json(rows);
    write_json(args.out_dir + "/grid_report.json", rep);
    write_text(args.out_dir + "/grid_report.csv", variant_rows_csv(rows));
    write_manifest(args.out_dir, "grid", cfg, args.data_dir, data.fingerprint,
                   {"grid_report.json", "grid_report.csv"});
    print_variant_rows(rows);
    return 0;
}

// ---- sweep ----

int cmd_sweep(const SweepArgs& args) {
    TrainConfig base = load_config(args.config_path, args.overrides);

    std::vector<double> values = args.values;
    std::function<void(TrainConfig&, double)> apply;
    if (args.parameter == "tau") {
        if (values.empty()) values = {0.05, 0.075, 0.1, 0.125, 0.15};
        apply = [](TrainConfig& c, double v) { c.hyper.tau = v; };
    } else if (args.parameter == "alpha") {
        if (values.empty()) values = {0.0, 0.25, 0.5, 0.75, 1.0};
        apply = [](TrainConfig& c, double v) { c.hyper.alpha = v; };
    } else if (args.parameter == "lambda1") {
        if (values.empty()) values = {1e-6, 5e-6, 1e-5, 5e-5};
        apply = [](TrainConfig& c, double v) { c.hyper.lambda1 = v; };
    } else {
        throw std::runtime_error("unknown sweep parameter '" + args.parameter +
                                 "'; valid parameters: tau, alpha, lambda1");
    }
    for (double v : values) {
        if (!std::isfinite(v)) throw std::runtime_error("sweep values must be finite");
        if (args.parameter == "tau" && v <= 0) throw std::runtime_error("tau must be > 0");
        if (args.parameter == "alpha" && (v < 0 || v > 1))
            throw std::runtime_error("alpha must be in [0, 1]");
        if (args.parameter == "lambda1" && v < 0)
            throw std::runtime_error("lambda1 must be >= 0");
    }
    std::sort(values.begin(), values.end());

    PreparedData data = load_prepared(args.data_dir);
    fs::create_directories(args.out_dir);
    PropagationOperator op = build_operator(data.split.train);

    json arr = json::array();
    std::ostringstream csv;
    csv << "parameter,value";
    for (int64_t k : kEvalKs) csv << ",recall@" << k << ",ndcg@" << k;
    csv << '\n';

    for (double v : values) {
        TrainConfig cfg = base;
        apply(cfg, v);
        VariantRow row;
        if (cfg.precision == 64) {
            row = run_variant<double>(cfg, data.split, op);
        } else {
            row = run_variant<float>(cfg, data.split, op);
        }
        arr.push_back({{"parameter", args.parameter},
                       {"value", v},
                       {"best_epoch", row.best_epoch},
                       {"metrics", metrics_json(row.test)}});
        csv << args.parameter << ',' << fmt_double(v);
        for (int64_t k : kEvalKs)
            csv << ',' << fmt_double(row.test.metric(static_cast<int>(k), false)) << ','
                << fmt_double(row.test.metric(static_cast<int>(k), true));
        csv << '\n';
        std::cout << args.parameter << " = " << fmt_double(v) << ": recall@10 = "
                  << fmt_double(row.test.metric(10, false))
                  << ", ndcg@10 = " << fmt_double(row.test.metric(10, true)) << "\n";
    }

    json rep;
    rep["parameter"] = args.parameter;
    rep["rows"] = arr;
    write_json(args.out_dir + "/sweep_report.json", rep);
    write_text(args.out_dir + "/sweep_report.csv", csv.str());
    write_manifest(args.out_dir, "sweep", base, args.data_dir, data.fingerprint,
                   {"sweep_report.json", "sweep_report.csv"});
    return 0;
}

// ---- bench ----

namespace {

double quantile(std::vector<double> xs, double p) {
    std::sort(xs.begin(), xs.end());
    const double h = (static_cast<double>(xs.size()) - 1.0) * p;
    const size_t lo = static_cast<size_t>(h);
    if (lo + 1 >= xs.size()) return xs.back();
    return xs[lo] + (h - static_cast<double>(lo)) * (xs[lo + 1] - xs[lo]);
}

TrainConfig bench_variant_config(const TrainConfig& base, const std::string& name) {
    TrainConfig cfg = base;
    if (name == "lightgcn") {
        cfg.scheme = Scheme::None;
        cfg.layers = 3;
        cfg.hyper.lambda1 = 0.0;
    } else {
        auto s = parse_scheme(name);
        if (!s || *s == Scheme::None)
            throw std::runtime_error("unknown bench scheme '" + name + "'");
        cfg.scheme = *s;
        cfg.layers = -1;
    }
    return cfg;
}

}  // namespace

int cmd_bench(const BenchArgs& args) {
    TrainConfig base = load_config(args.config_path, args.overrides);
    PreparedData data = load_prepared(args.data_dir);
    fs::create_directories(args.out_dir);
    if (args.repetitions < 1) throw std::runtime_error("bench repetitions must be >= 1");

    std::vector<std::string> schemes = args.schemes;
    if (schemes.empty()) schemes = {"u0_i1", "lightgcn"};

    PropagationOperator op = build_operator(data.split.train);

    json rows = json::array();
    std::ostringstream csv;
    csv << "scheme,layers,epochs_timed,median_ms,iqr_ms,total_s,best_epoch\n";
    std::map<std::string, double> medians;

    for (const auto& name : schemes) {
        TrainConfig cfg = bench_variant_config(base, name);
        std::vector<double> epoch_ms;
        double total_s = 0.0;
        int best_epoch = -1;
        int epochs_run = 0;

        if (args.full_training) {
            const auto t0 = std::chrono::steady_clock::now();
            TrainResult<float> rf;
            TrainResult<double> rd;
            const TrainHistory& hist = cfg.precision == 64
                                           ? (rd = train<double>(cfg, data.split, op)).history
                                           : (rf = train<float>(cfg, data.split, op)).history;
            total_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            for (const auto& r : hist.epochs) epoch_ms.push_back(r.wall_ms);
            best_epoch = hist.best_epoch;
            epochs_run = static_cast<int>(hist.epochs.size());
        } else {
            cfg.max_epochs = args.warmup + args.repetitions;
            cfg.early_stopping = false;
            cfg.eval_every = cfg.max_epochs + 1;
            const auto t0 = std::chrono::steady_clock::now();
            TrainHistory hist = cfg.precision == 64
                                    ? train<double>(cfg, data.split, op).history
                                    : train<float>(cfg, data.split, op).history;
            total_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            for (size_t e = static_cast<size_t>(args.warmup); e < hist.epochs.size(); ++e)
                epoch_ms.push_back(hist.epochs[e].wall_ms);
            epochs_run = static_cast<int>(hist.epochs.size());
        }

        const double median = quantile(epoch_ms, 0.5);
        const bool have_iqr = epoch_ms.size() >= 2;
        const double iqr = have_iqr ? quantile(epoch_ms, 0.75) - quantile(epoch_ms, 0.25) : 0.0;
        medians[name] = median;

        json row;
        row["scheme"] = name;
        row["layers"] = cfg.effective_layers();
        row["epochs_timed"] = epoch_ms.size();
        row["median_ms"] = median;
        if (have_iqr) {
            row["iqr_ms"] = iqr;
        } else {
            row["iqr_ms"] = nullptr;
        }
        row["epoch_ms"] = epoch_ms;
        row["total_s"] = total_s;
        if (args.full_training) {
            row["best_epoch"] = best_epoch;
            row["epochs_run"] = epochs_run;
        }
        rows.push_back(row);

        csv << name << ',' << cfg.effective_layers() << ',' << epoch_ms.size() << ','
            << fmt_double(median) << ',' << (have_iqr ? fmt_double(iqr) : std::string()) << ','
            << fmt_double(total_s) << ',' << (args.full_training ? std::to_string(best_epoch) : std::string())
            << '\n';
        std::cout << name << ": median " << fmt_double(median) << " ms/epoch"
                  << (have_iqr ? " (iqr " + fmt_double(iqr) + ")" : "") << "\n";
    }

    json rep;
    rep["mode"] = args.full_training ? "full" : "timed";
    rep["repetitions"] = args.repetitions;
    rep["warmup"] = args.warmup;
    rep["batch_size"] = base.batch_size;
    rep["rows"] = rows;
    if (medians.count("u0_i1") && medians.count("lightgcn") && medians["lightgcn"] > 0) {
        const double ratio = medians["u0_i1"] / medians["lightgcn"];
        rep["u0_i1_over_lightgcn"] = ratio;
        std::cout << "median ratio u0_i1 / lightgcn = " << fmt_double(ratio) << "\n";
    }
    write_json(args.out_dir + "/bench_report.json", rep);
    write_text(args.out_dir + "/bench_report.csv", csv.str());
    write_manifest(args.out_dir, "bench", base, args.data_dir, data.fingerprint,
                   {"bench_report.json", "bench_report.csv"});
    return 0;
}

// ---- export ----

namespace {

template <class S>
void run_export_cmd(const TrainConfig& cfg, const ExportArgs& args) {
    auto state = load_checkpoint<S>(args.checkpoint);
    const int32_t m = state.num_users, n = state.num_items;

    Mat<S> emb;
    if (args.what == "layer0") {
        emb = state.best_table;
    } else if (args.what == "readout") {
        PreparedData data = load_prepared(args.data_dir);
        if (m != data.split.num_users() || n != data.split.num_items())
            throw std::runtime_error("checkpoint user/item counts do not match the data dir");
        PropagationOperator op = build_operator(data.split.train);
        LayerStack<S> stack;
        forward(state.best_table, op, cfg.effective_layers(), stack, cfg.readout_mode,
                cfg.workers);
        emb = std::move(stack.readout);
    } else {
        throw std::runtime_error("unknown export source '" + args.what +
                                 "' (expected readout or layer0)");
    }

    if (args.format == "binary") {
        if (args.sample_users > 0)
            throw std::runtime_error("subsampling applies to text export only");
        export_embeddings_binary(args.out_file, emb, m, n);
    } else if (args.format == "text") {
        std::vector<int64_t> nodes;
        if (args.sample_users > 0) {
            if (args.sample_users > m)
                throw std::runtime_error("cannot sample " + std::to_string(args.sample_users) +
                                         " users from " + std::to_string(m));
            std::vector<int64_t> users(static_cast<size_t>(m));
            for (int64_t u = 0; u < m; ++u) users[u] = u;
            std::mt19937_64 rng(mix_seed(args.sample_seed, 2));
            for (size_t k = users.size(); k > 1; --k) {
                size_t j = static_cast<size_t>(bounded_rand(rng, k));
                std::swap(users[k - 1], users[j]);
            }
            nodes.assign(users.begin(), users.begin() + args.sample_users);
            std::sort(nodes.begin(), nodes.end());
        } else {
            nodes.resize(static_cast<size_t>(emb.rows));
            for (int64_t v = 0; v < emb.rows; ++v) nodes[v] = v;
        }
        export_embeddings_text(args.out_file, emb, nodes);
    } else {
        throw std::runtime_error("unknown export format '" + args.format +
                                 "' (expected text or binary)");
    }
    std::cout << "exported " << args.what << " embeddings (" << args.format << ") -> "
              << args.out_file << "\n";
}

}  // namespace

int cmd_export(const ExportArgs& args) {
    TrainConfig cfg = load_config(args.config_path, args.overrides);
    const int prec = checkpoint_precision(args.checkpoint);
    if (prec == 64) {
        run_export_cmd<double>(cfg, args);
    } else {
        run_export_cmd<float>(cfg, args);
    }
    return 0;
}

// ---- synth ----

int cmd_synth(const SynthArgs& args) {
    auto pairs = synth_interactions(args.params);
    if (!args.out_file.empty()) {
        if (args.out_file.find('/') != std::string::npos)
            fs::create_directories(fs::path(args.out_file).parent_path());
        write_raw_pairs_tsv(args.out_file, pairs);
    }
    std::cout << "synthesized " << pairs.size() << " interactions ("
              << args.params.num_users << " users, " << args.params.num_items << " items, "
              << args.params.num_clusters << " clusters) -> " << args.out_file << "\n";
    return 0;
}

}  // namespace l2cl
