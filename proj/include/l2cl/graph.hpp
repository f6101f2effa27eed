#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "l2cl/data.hpp"
#include "l2cl/matrix.hpp"

namespace l2cl {

// Bipartite interaction graph over M+N nodes (users first, then items),
// stored as symmetric CSR.
struct InteractionGraph {
    int32_t num_users = 0;
    int32_t num_items = 0;
    std::vector<int64_t> offsets;  // size M+N+1
    std::vector<int32_t> cols;     // sorted within each row

    int64_t num_nodes() const { return int64_t(num_users) + num_items; }
    int64_t nnz() const { return static_cast<int64_t>(cols.size()); }
    int64_t degree(int64_t v) const { return offsets[v + 1] - offsets[v]; }
};

// Same sparsity as the graph with edge weight 1/sqrt(deg(u)*deg(i)), stored
// once per direction so weight(u,i) == weight(i,u) bitwise. Weights are kept
// in double regardless of the embedding storage type.
struct PropagationOperator {
    int32_t num_users = 0;
    int32_t num_items = 0;
    std::vector<int64_t> offsets;
    std::vector<int32_t> cols;
    std::vector<double> weights;

    int64_t num_nodes() const { return int64_t(num_users) + num_items; }
    int64_t nnz() const { return static_cast<int64_t>(cols.size()); }
};

InteractionGraph build_graph(const InteractionSet& train);
PropagationOperator normalize(const InteractionGraph& graph);

inline PropagationOperator build_operator(const InteractionSet& train) {
    return normalize(build_graph(train));
}

// One sparse matrix-dense matrix product: out[v] = sum_w weight(v,w) * in[w].
// Row accumulation is in 64-bit; rows partition across workers with no
// cross-row writes, so the output is identical for any worker count.
template <class S>
void propagate(const PropagationOperator& op, const Mat<S>& in, Mat<S>& out, int workers = 1) {
    const int64_t n = op.num_nodes();
    if (in.rows != n) throw std::invalid_argument("propagate: embedding row count != M+N");
    const int64_t d = in.cols;
    if (out.rows != n || out.cols != d) out.resize(n, d);

    parallel_for(n, workers, [&](int64_t lo, int64_t hi) {
        std::vector<double> acc(static_cast<size_t>(d));
        for (int64_t v = lo; v < hi; ++v) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (int64_t e = op.offsets[v]; e < op.offsets[v + 1]; ++e) {
                const double w = op.weights[e];
                const S* src = in.row(op.cols[e]);
                for (int64_t k = 0; k < d; ++k) acc[k] += w * double(src[k]);
            }
            S* dst = out.row(v);
            for (int64_t k = 0; k < d; ++k) dst[k] = static_cast<S>(acc[k]);
        }
    });
}

// Binary cache (little-endian): magic, version, M, N, nnz, offsets, cols,
// weights. Lets repeated runs skip the rebuild.
void save_operator(const std::string& path, const PropagationOperator& op);
PropagationOperator load_operator(const std::string& path);

}  // namespace l2cl
