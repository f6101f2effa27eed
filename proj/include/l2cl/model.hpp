#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "l2cl/graph.hpp"
#include "l2cl/matrix.hpp"

namespace l2cl {

// Xavier-uniform E^(0): entries i.i.d. on [-sqrt(6/(d+d)), +sqrt(6/(d+d))],
// deterministic given the seed.
template <class S>
Mat<S> init_embeddings(int32_t num_users, int32_t num_items, int64_t dim, uint64_t seed) {
    if (dim < 1) throw std::invalid_argument("embedding dimension must be >= 1");
    Mat<S> table(int64_t(num_users) + num_items, dim);
    const double bound = std::sqrt(6.0 / static_cast<double>(dim + dim));
    std::mt19937_64 rng(seed);
    for (auto& x : table.a) x = static_cast<S>(bound * (2.0 * unit_rand(rng) - 1.0));
    return table;
}

// Cached per-layer outputs E^(0)..E^(L) plus the mean readout.
template <class S>
struct LayerStack {
    std::vector<Mat<S>> layers;
    Mat<S> readout;

    int depth() const { return static_cast<int>(layers.size()) - 1; }
    const Mat<S>& layer(int l) const { return layers[static_cast<size_t>(l)]; }
};

enum class ReadoutMode { MeanLayers, Layer0 };

template <class S>
void forward(const Mat<S>& e0, const PropagationOperator& op, int num_layers, LayerStack<S>& out,
             ReadoutMode mode = ReadoutMode::MeanLayers, int workers = 1) {
    if (num_layers < 0) throw std::invalid_argument("layer count must be >= 0");
    out.layers.resize(static_cast<size_t>(num_layers) + 1);
    out.layers[0] = e0;
    for (int l = 1; l <= num_layers; ++l) {
        propagate(op, out.layers[static_cast<size_t>(l) - 1], out.layers[static_cast<size_t>(l)],
                  workers);
    }

    if (mode == ReadoutMode::Layer0) {
        out.readout = e0;
        return;
    }
    const int64_t n = e0.rows, d = e0.cols;
    if (out.readout.rows != n || out.readout.cols != d) out.readout.resize(n, d);
    const double inv = 1.0 / static_cast<double>(num_layers + 1);
    parallel_for(n, workers, [&](int64_t lo, int64_t hi) {
        for (int64_t v = lo; v < hi; ++v) {
            S* dst = out.readout.row(v);
            for (int64_t k = 0; k < d; ++k) {
                double acc = 0.0;
                for (int l = 0; l <= num_layers; ++l)
                    acc += double(out.layers[static_cast<size_t>(l)].row(v)[k]);
                dst[k] = static_cast<S>(acc * inv);
            }
        }
    });
}

template <class S>
double score(const Mat<S>& readout, int32_t num_users, int32_t u, int32_t i) {
    const int64_t n = readout.rows;
    if (u < 0 || u >= num_users || i < 0 || int64_t(num_users) + i >= n)
        throw std::out_of_range("score: user or item index out of range");
    return dot(readout.row(u), readout.row(int64_t(num_users) + i), readout.cols);
}

// Top-K items for u by descending score, ties broken by ascending item index.
// Excluded items never appear; asks for more than remain -> shorter list.
template <class S>
std::vector<int32_t> rank_items(const Mat<S>& readout, int32_t num_users, int32_t num_items,
                                int32_t u, std::span<const int32_t> exclude_sorted, int64_t k) {
    if (k < 1) throw std::invalid_argument("rank_items: K must be >= 1");
    std::vector<double> scores(static_cast<size_t>(num_items));
    const S* eu = readout.row(u);
    const int64_t d = readout.cols;
    for (int32_t i = 0; i < num_items; ++i)
        scores[i] = dot(eu, readout.row(int64_t(num_users) + i), d);

    std::vector<int32_t> order;
    order.reserve(static_cast<size_t>(num_items));
    size_t e = 0;
    for (int32_t i = 0; i < num_items; ++i) {
        if (e < exclude_sorted.size() && exclude_sorted[e] == i) {
            ++e;
            continue;
        }
        order.push_back(i);
    }
    auto better = [&](int32_t a, int32_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    };
    const size_t take = std::min<size_t>(static_cast<size_t>(k), order.size());
    std::partial_sort(order.begin(), order.begin() + take, order.end(), better);
    order.resize(take);
    return order;
}

// Embedding export (workflow support; plotting lives elsewhere).
// Text: "node_index<TAB>v0,v1,..." for the given rows. Binary: magic,
// version, M, N, d, full table row-major float32, little-endian.
template <class S>
void export_embeddings_text(const std::string& path, const Mat<S>& emb,
                            std::span<const int64_t> node_indices);
template <class S>
void export_embeddings_binary(const std::string& path, const Mat<S>& emb, int32_t num_users,
                              int32_t num_items);

struct EmbeddingFile {
    int32_t num_users = 0;
    int32_t num_items = 0;
    Mat<float> rows;
};
EmbeddingFile load_embeddings_binary(const std::string& path);

}  // namespace l2cl
