#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "l2cl/data.hpp"
#include "l2cl/matrix.hpp"
#include "l2cl/model.hpp"

namespace l2cl {

struct EvalResult {
    struct PerK {
        int k = 0;
        double recall = 0.0;
        double ndcg = 0.0;
    };
    std::vector<PerK> per_k;
    int64_t users_evaluated = 0;

    double metric(int k, bool ndcg) const {
        for (const auto& p : per_k)
            if (p.k == k) return ndcg ? p.ndcg : p.recall;
        throw std::out_of_range("metric for requested K not computed");
    }
};

inline double recall_at_k(std::span<const int32_t> ranked, std::span<const int32_t> relevant_sorted,
                          int64_t k) {
    if (relevant_sorted.empty()) throw std::invalid_argument("recall: empty relevant set");
    const size_t upto = std::min<size_t>(static_cast<size_t>(k), ranked.size());
    int64_t hits = 0;
    for (size_t p = 0; p < upto; ++p) {
        if (std::binary_search(relevant_sorted.begin(), relevant_sorted.end(), ranked[p])) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(relevant_sorted.size());
}

// Binary relevance, 1-indexed positions, 1/log2(p+1) discount; IDCG places
// min(K, |relevant|) hits at the top.
inline double ndcg_at_k(std::span<const int32_t> ranked, std::span<const int32_t> relevant_sorted,
                        int64_t k) {
    if (relevant_sorted.empty()) throw std::invalid_argument("ndcg: empty relevant set");
    const size_t upto = std::min<size_t>(static_cast<size_t>(k), ranked.size());
    double dcg = 0.0;
    for (size_t p = 0; p < upto; ++p) {
        if (std::binary_search(relevant_sorted.begin(), relevant_sorted.end(), ranked[p]))
            dcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
    }
    const int64_t ideal = std::min<int64_t>(k, static_cast<int64_t>(relevant_sorted.size()));
    double idcg = 0.0;
    for (int64_t p = 0; p < ideal; ++p) idcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
    return dcg / idcg;
}

enum class Phase { Validation, Test };

// All-rank protocol: per user, mask the training items (plus validation
// items in the test phase), rank every remaining item, and macro-average
// over users with at least one ground-truth item. The per-user loop may
// partition across workers; the reduction is a canonical pairwise sum over
// the user-ordered array, so results are identical for any worker count.
template <class S>
EvalResult evaluate(const Mat<S>& readout, const SplitDataset& split, Phase phase,
                    std::span<const int64_t> ks, int workers = 1,
                    std::span<const int32_t> user_subset = {}) {
    const int32_t num_users = split.num_users();
    const int32_t num_items = split.num_items();
    const InteractionSet& truth = phase == Phase::Validation ? split.valid : split.test;
    const int64_t max_k = *std::max_element(ks.begin(), ks.end());

    std::vector<int32_t> users;
    if (user_subset.empty()) {
        users.resize(static_cast<size_t>(num_users));
        std::iota(users.begin(), users.end(), 0);
    } else {
        users.assign(user_subset.begin(), user_subset.end());
    }
    std::vector<int32_t> evaluated;
    evaluated.reserve(users.size());
    for (int32_t u : users) {
        if (truth.degree(u) > 0) evaluated.push_back(u);
    }

    const size_t nk = ks.size();
    const size_t nu = evaluated.size();
    std::vector<double> recalls(nu * nk, 0.0), ndcgs(nu * nk, 0.0);

    parallel_for(static_cast<int64_t>(nu), workers, [&](int64_t lo, int64_t hi) {
        std::vector<int32_t> mask;
        std::vector<std::pair<double, int32_t>> order;
        for (int64_t idx = lo; idx < hi; ++idx) {
            const int32_t u = evaluated[idx];
            auto train_row = split.train.items_of(u);
            mask.assign(train_row.begin(), train_row.end());
            if (phase == Phase::Test) {
                auto val_row = split.valid.items_of(u);
                mask.insert(mask.end(), val_row.begin(), val_row.end());
                std::sort(mask.begin(), mask.end());
            }

            const S* eu = readout.row(u);
            order.clear();
            size_t mcur = 0;
            for (int32_t i = 0; i < num_items; ++i) {
                if (mcur < mask.size() && mask[mcur] == i) {
                    ++mcur;
                    continue;
                }
                order.emplace_back(
                    -double(dot_fast(eu, readout.row(int64_t(num_users) + i), readout.cols)), i);
            }
            const size_t take = std::min<size_t>(static_cast<size_t>(max_k), order.size());
            std::partial_sort(order.begin(), order.begin() + take, order.end());

            std::vector<int32_t> topk(take);
            for (size_t p = 0; p < take; ++p) topk[p] = order[p].second;
            auto relevant = truth.items_of(u);
            for (size_t j = 0; j < nk; ++j) {
                recalls[idx * nk + j] = recall_at_k(topk, relevant, ks[j]);
                ndcgs[idx * nk + j] = ndcg_at_k(topk, relevant, ks[j]);
            }
        }
    });

    EvalResult out;
    out.users_evaluated = static_cast<int64_t>(nu);
    for (size_t j = 0; j < nk; ++j) {
        std::vector<double> rc(nu), nd(nu);
        for (size_t idx = 0; idx < nu; ++idx) {
            rc[idx] = recalls[idx * nk + j];
            nd[idx] = ndcgs[idx * nk + j];
        }
        EvalResult::PerK p;
        p.k = static_cast<int>(ks[j]);
        p.recall = nu ? pairwise_sum(rc) / static_cast<double>(nu) : 0.0;
        p.ndcg = nu ? pairwise_sum(nd) / static_cast<double>(nu) : 0.0;
        out.per_k.push_back(p);
    }
    return out;
}

struct SparsityGroups {
    std::vector<std::vector<int32_t>> groups;  // ascending interaction frequency
};

// Users sorted ascending by train degree (ties by index); each group closes
// once its cumulative interaction count reaches the target. Trailing users
// join the last group.
std::vector<std::vector<int32_t>> greedy_degree_groups(const InteractionSet& train,
                                                       std::span<const int32_t> users,
                                                       double target);

// Greedy sweep with target = total/num_groups. Throws when the sweep cannot
// fill exactly num_groups groups (tiny or extremely skewed data).
SparsityGroups sparsity_groups(const InteractionSet& train, std::span<const int32_t> users,
                               int num_groups = 5);

}  // namespace l2cl
