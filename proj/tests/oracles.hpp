#pragma once

// Test-only naive reference implementations, kept independent of the library
// code paths they check: dense adjacency products, scalar double-loop losses,
// full-sort ranking, hand metric formulas.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include "l2cl/data.hpp"
#include "l2cl/losses.hpp"
#include "l2cl/matrix.hpp"

namespace oracle {

using Vec = std::vector<double>;
using Grid = std::vector<Vec>;

inline double vdot(const Vec& a, const Vec& b) {
    double s = 0;
    for (size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

inline double vnorm(const Vec& a) { return std::sqrt(vdot(a, a)); }

inline double cosine(const Vec& a, const Vec& b) {
    double s = vdot(a, b) / (vnorm(a) * vnorm(b) + 1e-12);
    return std::min(1.0, std::max(-1.0, s));
}

template <class S>
inline Grid to_grid(const l2cl::Mat<S>& m) {
    Grid g(static_cast<size_t>(m.rows), Vec(static_cast<size_t>(m.cols)));
    for (int64_t r = 0; r < m.rows; ++r)
        for (int64_t c = 0; c < m.cols; ++c) g[r][c] = double(m.row(r)[c]);
    return g;
}

// Dense symmetric-normalized adjacency over M+N nodes, built from the raw
// interaction set (not from the library operator).
inline Grid dense_adjacency(const l2cl::InteractionSet& train) {
    const int n = train.num_users + train.num_items;
    Grid a(static_cast<size_t>(n), Vec(static_cast<size_t>(n), 0.0));
    std::vector<int> deg(static_cast<size_t>(n), 0);
    for (int32_t u = 0; u < train.num_users; ++u) {
        for (int32_t i : train.items_of(u)) {
            ++deg[u];
            ++deg[train.num_users + i];
        }
    }
    for (int32_t u = 0; u < train.num_users; ++u) {
        for (int32_t i : train.items_of(u)) {
            const int v = train.num_users + i;
            const double w = 1.0 / std::sqrt(double(deg[u]) * double(deg[v]));
            a[u][v] = w;
            a[v][u] = w;
        }
    }
    return a;
}

inline Grid matmul(const Grid& a, const Grid& b) {
    Grid c(a.size(), Vec(b[0].size(), 0.0));
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t k = 0; k < b.size(); ++k) {
            const double aik = a[i][k];
            if (aik == 0.0) continue;
            for (size_t j = 0; j < b[0].size(); ++j) c[i][j] += aik * b[k][j];
        }
    return c;
}

// Layers E^(0)..E^(L) by repeated dense products.
inline std::vector<Grid> dense_layers(const Grid& adj, const Grid& e0, int depth) {
    std::vector<Grid> layers{e0};
    for (int l = 1; l <= depth; ++l) layers.push_back(matmul(adj, layers.back()));
    return layers;
}

inline Grid mean_readout(const std::vector<Grid>& layers) {
    Grid r(layers[0].size(), Vec(layers[0][0].size(), 0.0));
    for (const auto& layer : layers)
        for (size_t i = 0; i < r.size(); ++i)
            for (size_t j = 0; j < r[0].size(); ++j) r[i][j] += layer[i][j];
    for (auto& row : r)
        for (auto& x : row) x /= static_cast<double>(layers.size());
    return r;
}

inline double naive_bpr(const Grid& readout, int num_users, const l2cl::TrainBatch& batch) {
    double total = 0;
    for (size_t t = 0; t < batch.size(); ++t) {
        const Vec& eu = readout[batch.user[t]];
        const Vec& ep = readout[num_users + batch.item_pos[t]];
        const Vec& en = readout[num_users + batch.item_neg[t]];
        const double x = vdot(eu, ep) - vdot(eu, en);
        total += -std::log(1.0 / (1.0 + std::exp(-x)));
    }
    return total;
}

inline double naive_infonce(const Grid& anchors, const std::vector<int>& pos_index,
                            const Grid& cands, double tau) {
    double total = 0;
    for (size_t i = 0; i < anchors.size(); ++i) {
        double denom = 0;
        for (const auto& c : cands) denom += std::exp(cosine(anchors[i], c) / tau);
        const double num = std::exp(cosine(anchors[i], cands[pos_index[i]]) / tau);
        total += -std::log(num / denom);
    }
    return total;
}

// One side of a heterogeneous contrast (Eq.-style scalar loops): anchors are
// one node type at layer m, positives the paired node at layer n, candidates
// the unique positives.
inline double naive_hetero_side(const std::vector<Grid>& layers, int m, int n,
                                const std::vector<int>& anchor_rows,
                                const std::vector<int>& positive_rows, double tau) {
    std::vector<int> cand_rows(positive_rows);
    std::sort(cand_rows.begin(), cand_rows.end());
    cand_rows.erase(std::unique(cand_rows.begin(), cand_rows.end()), cand_rows.end());
    double total = 0;
    for (size_t t = 0; t < anchor_rows.size(); ++t) {
        const Vec& a = layers[m][anchor_rows[t]];
        double denom = 0;
        for (int c : cand_rows) denom += std::exp(cosine(a, layers[n][c]) / tau);
        total += -std::log(std::exp(cosine(a, layers[n][positive_rows[t]]) / tau) / denom);
    }
    return total;
}

// Same but the positive/candidate representation is the mean of layer range
// [from, to] per node.
inline double naive_hetero_side_mean(const std::vector<Grid>& layers, int m, int from, int to,
                                     const std::vector<int>& anchor_rows,
                                     const std::vector<int>& positive_rows, double tau) {
    auto combined = [&](int row) {
        Vec v(layers[0][0].size(), 0.0);
        for (int l = from; l <= to; ++l)
            for (size_t k = 0; k < v.size(); ++k) v[k] += layers[l][row][k];
        for (auto& x : v) x /= static_cast<double>(to - from + 1);
        return v;
    };
    std::vector<int> cand_rows(positive_rows);
    std::sort(cand_rows.begin(), cand_rows.end());
    cand_rows.erase(std::unique(cand_rows.begin(), cand_rows.end()), cand_rows.end());
    std::vector<Vec> cands;
    for (int c : cand_rows) cands.push_back(combined(c));
    double total = 0;
    for (size_t t = 0; t < anchor_rows.size(); ++t) {
        const Vec& a = layers[m][anchor_rows[t]];
        double denom = 0;
        for (const auto& c : cands) denom += std::exp(cosine(a, c) / tau);
        const Vec pos = combined(positive_rows[t]);
        total += -std::log(std::exp(cosine(a, pos) / tau) / denom);
    }
    return total;
}

inline double naive_scheme(l2cl::Scheme scheme, const std::vector<Grid>& layers,
                           const l2cl::TrainBatch& batch, int num_users, double tau,
                           double alpha) {
    std::vector<int> urows(batch.user.begin(), batch.user.end());
    std::vector<int> irows;
    for (int32_t i : batch.item_pos) irows.push_back(num_users + i);

    switch (scheme) {
        case l2cl::Scheme::U0_I0:
            return naive_hetero_side(layers, 0, 0, irows, urows, tau);
        case l2cl::Scheme::U1_I1:
            return naive_hetero_side(layers, 1, 1, irows, urows, tau);
        case l2cl::Scheme::U0_I1:
            return alpha * naive_hetero_side(layers, 1, 0, irows, urows, tau) +
                   (1 - alpha) * naive_hetero_side(layers, 1, 0, urows, irows, tau);
        case l2cl::Scheme::U0_U2:
            return alpha * naive_hetero_side(layers, 0, 2, urows, urows, tau) +
                   (1 - alpha) * naive_hetero_side(layers, 0, 2, irows, irows, tau);
        case l2cl::Scheme::U0_SumU123:
            return alpha * naive_hetero_side_mean(layers, 0, 1, 3, urows, urows, tau) +
                   (1 - alpha) * naive_hetero_side_mean(layers, 0, 1, 3, irows, irows, tau);
        default:
            return 0.0;
    }
}

inline double naive_recall(const std::vector<int32_t>& ranked, const std::set<int32_t>& relevant,
                           int k) {
    int hits = 0;
    for (int p = 0; p < k && p < static_cast<int>(ranked.size()); ++p)
        hits += relevant.count(ranked[p]) ? 1 : 0;
    return double(hits) / double(relevant.size());
}

inline double naive_ndcg(const std::vector<int32_t>& ranked, const std::set<int32_t>& relevant,
                         int k) {
    double dcg = 0;
    for (int p = 0; p < k && p < static_cast<int>(ranked.size()); ++p)
        if (relevant.count(ranked[p])) dcg += 1.0 / std::log2(p + 2.0);
    double idcg = 0;
    const int ideal = std::min<int>(k, static_cast<int>(relevant.size()));
    for (int p = 0; p < ideal; ++p) idcg += 1.0 / std::log2(p + 2.0);
    return dcg / idcg;
}

// Random bipartite interaction set where every user and item has at least
// one edge (keeps propagation layers away from exact-zero rows).
inline l2cl::InteractionSet random_bipartite(int32_t num_users, int32_t num_items,
                                             int64_t extra_edges, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::set<std::pair<int32_t, int32_t>> edges;
    for (int32_t i = 0; i < num_items; ++i)
        edges.emplace(static_cast<int32_t>(l2cl::bounded_rand(rng, num_users)), i);
    for (int32_t u = 0; u < num_users; ++u)
        edges.emplace(u, static_cast<int32_t>(l2cl::bounded_rand(rng, num_items)));
    for (int64_t e = 0; e < extra_edges; ++e)
        edges.emplace(static_cast<int32_t>(l2cl::bounded_rand(rng, num_users)),
                      static_cast<int32_t>(l2cl::bounded_rand(rng, num_items)));
    std::vector<std::pair<int32_t, int32_t>> pairs(edges.begin(), edges.end());
    return l2cl::make_interaction_set(num_users, num_items, std::move(pairs));
}

template <class S>
inline l2cl::Mat<S> random_mat(int64_t rows, int64_t cols, uint64_t seed, double scale = 1.0) {
    l2cl::Mat<S> m(rows, cols);
    std::mt19937_64 rng(seed);
    for (auto& x : m.a) x = static_cast<S>(scale * (2.0 * l2cl::unit_rand(rng) - 1.0));
    return m;
}

// Batch of observed train edges with negatives drawn honestly.
inline l2cl::TrainBatch observed_batch(const l2cl::InteractionSet& train, int64_t size,
                                       uint64_t seed) {
    std::mt19937_64 rng(seed);
    return l2cl::sample_bpr_batch(train, size, rng);
}

}  // namespace oracle
