#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "l2cl/graph.hpp"
#include "l2cl/losses.hpp"
#include "l2cl/matrix.hpp"
#include "l2cl/model.hpp"

namespace l2cl {

// Pulls accumulated per-layer gradients back to E^(0). The pipeline is
// linear and the operator symmetric, so a gradient G at layer l contributes
// A^l G at layer 0; readout gradients first distribute 1/(L+1) to every
// layer (or entirely to layer 0 in Layer0 readout mode). Evaluated as a
// Horner chain: T = G_L; T <- A T + G_(L-1); ...; T <- A T + G_0.
template <class S>
void backward(const PropagationOperator& op, int num_layers, const GradAccumulator<S>& acc,
              ReadoutMode mode, Mat<S>& d_e0, Mat<S>& scratch, int workers = 1) {
    const int64_t n = op.num_nodes();
    const int64_t d = acc.dim();
    if (d_e0.rows != n || d_e0.cols != d) d_e0.resize(n, d);
    if (scratch.rows != n || scratch.cols != d) scratch.resize(n, d);
    d_e0.zero();

    const auto& buckets = acc.buckets();
    for (const auto& [layer, b] : buckets) {
        if (layer > num_layers)
            throw std::invalid_argument("backward: gradient addresses layer beyond stack depth");
    }
    auto scatter = [&](Mat<S>& dst, int layer, double scale) {
        auto it = buckets.find(layer);
        if (it == buckets.end()) return;
        const auto& b = it->second;
        for (size_t r = 0; r < b.rows.size(); ++r) {
            S* out = dst.row(b.rows[r]);
            const S* g = b.data.data() + r * static_cast<size_t>(d);
            for (int64_t k = 0; k < d; ++k) out[k] += static_cast<S>(scale * double(g[k]));
        }
    };

    const double readout_w =
        mode == ReadoutMode::MeanLayers ? 1.0 / static_cast<double>(num_layers + 1) : 0.0;

    for (int l = num_layers; l >= 0; --l) {
        scatter(d_e0, l, 1.0);
        if (readout_w != 0.0) scatter(d_e0, kReadoutLayer, readout_w);
        if (l > 0) {
            propagate(op, d_e0, scratch, workers);
            std::swap(d_e0, scratch);
        }
    }
    if (mode == ReadoutMode::Layer0) scatter(d_e0, kReadoutLayer, 1.0);
}

template <class S>
std::vector<int32_t> collect_touched_rows(const Mat<S>& grads) {
    std::vector<int32_t> rows;
    for (int64_t v = 0; v < grads.rows; ++v) {
        const S* g = grads.row(v);
        for (int64_t k = 0; k < grads.cols; ++k) {
            if (g[k] != S(0)) {
                rows.push_back(static_cast<int32_t>(v));
                break;
            }
        }
    }
    return rows;
}

struct OptimError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Adam with lazy sparse rows: moments of rows that received no gradient are
// left untouched (no decay), matching per-batch cost to the batch footprint.
template <class S>
struct AdamState {
    Mat<S> m;
    Mat<S> v;
    int64_t t = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    AdamState() = default;
    AdamState(int64_t rows, int64_t cols, double lr_) : m(rows, cols), v(rows, cols), lr(lr_) {}
};

template <class S>
void adam_step(AdamState<S>& state, Mat<S>& table, std::span<const int32_t> rows,
               const Mat<S>& grads) {
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    const int64_t d = table.cols;

    for (int32_t r : rows) {
        const S* g = grads.row(r);
        S* m = state.m.row(r);
        S* v = state.v.row(r);
        S* x = table.row(r);
        for (int64_t k = 0; k < d; ++k) {
            const double gk = double(g[k]);
            if (!std::isfinite(gk))
                throw OptimError("non-finite gradient at row " + std::to_string(r));
            const double mk = state.beta1 * double(m[k]) + (1.0 - state.beta1) * gk;
            const double vk = state.beta2 * double(v[k]) + (1.0 - state.beta2) * gk * gk;
            m[k] = static_cast<S>(mk);
            v[k] = static_cast<S>(vk);
            const double mhat = mk / bc1;
            const double vhat = vk / bc2;
            x[k] = static_cast<S>(double(x[k]) - state.lr * mhat / (std::sqrt(vhat) + state.eps));
        }
    }
}

// Central-difference verification oracle (64-bit only). Returns the max
// relative error over the probed rows, with denominator
// max(|analytic|, |numeric|, 1e-8).
inline double finite_diff_check(const std::function<double(const Mat<double>&)>& loss_fn,
                                Mat<double>& table, std::span<const int32_t> rows,
                                const Mat<double>& analytic, double h = 1e-4) {
    double worst = 0.0;
    for (int32_t r : rows) {
        for (int64_t k = 0; k < table.cols; ++k) {
            double* x = table.row(r) + k;
            const double saved = *x;
            *x = saved + h;
            const double fp = loss_fn(table);
            *x = saved - h;
            const double fm = loss_fn(table);
            *x = saved;
            const double fd = (fp - fm) / (2.0 * h);
            const double an = analytic.row(r)[k];
            const double denom = std::max({std::abs(an), std::abs(fd), 1e-8});
            worst = std::max(worst, std::abs(an - fd) / denom);
        }
    }
    return worst;
}

}  // namespace l2cl
