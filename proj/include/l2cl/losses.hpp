#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "l2cl/data.hpp"
#include "l2cl/matrix.hpp"
#include "l2cl/model.hpp"

namespace l2cl {

// The five layer-to-layer contrast variants plus None for the plain BPR
// baseline. Naming follows anchor-positive layer pairs: U0_I1 is the one-hop
// contrast of a layer-0 node with its neighbor's layer-1 output.
enum class Scheme { None, U0_I0, U1_I1, U0_I1, U0_U2, U0_SumU123 };

inline int required_depth(Scheme s) {
    switch (s) {
        case Scheme::None: return 0;
        case Scheme::U0_I0: return 0;
        case Scheme::U1_I1: return 1;
        case Scheme::U0_I1: return 1;
        case Scheme::U0_U2: return 2;
        case Scheme::U0_SumU123: return 3;
    }
    return 0;
}

inline const char* scheme_name(Scheme s) {
    switch (s) {
        case Scheme::None: return "lightgcn";
        case Scheme::U0_I0: return "u0_i0";
        case Scheme::U1_I1: return "u1_i1";
        case Scheme::U0_I1: return "u0_i1";
        case Scheme::U0_U2: return "u0_u2";
        case Scheme::U0_SumU123: return "u0_sum_u123";
    }
    return "?";
}

inline std::optional<Scheme> parse_scheme(const std::string& name) {
    for (Scheme s : {Scheme::None, Scheme::U0_I0, Scheme::U1_I1, Scheme::U0_I1, Scheme::U0_U2,
                     Scheme::U0_SumU123}) {
        if (name == scheme_name(s)) return s;
    }
    if (name == "none") return Scheme::None;
    return std::nullopt;
}

struct CLHyper {
    double tau = 0.1;      // softmax temperature, > 0
    double alpha = 0.5;    // user/item side balance in [0,1]
    double lambda1 = 0.0;  // CL weight
    double lambda2 = 0.0;  // L2 regularization weight
};

constexpr int kReadoutLayer = -1;
constexpr double kCosineEps = 1e-12;

// Sparse per-row gradient buckets keyed by (layer, row). Layer -1 addresses
// the readout; the backward pass distributes it across layers. Rows iterate
// in insertion order, which is deterministic given the batch.
template <class S>
class GradAccumulator {
public:
    struct Bucket {
        std::vector<int32_t> rows;
        std::vector<S> data;  // packed rows.size() x dim
        std::unordered_map<int32_t, int32_t> slot;
    };

    explicit GradAccumulator(int64_t dim = 0) : dim_(dim) {}

    void reset(int64_t dim) {
        dim_ = dim;
        clear();
    }

    void clear() {
        for (auto& [l, b] : buckets_) {
            b.rows.clear();
            b.data.clear();
            b.slot.clear();
        }
    }

    S* row(int layer, int32_t r) {
        Bucket& b = buckets_[layer];
        auto [it, fresh] = b.slot.try_emplace(r, static_cast<int32_t>(b.rows.size()));
        if (fresh) {
            b.rows.push_back(r);
            b.data.resize(b.data.size() + static_cast<size_t>(dim_), S(0));
        }
        return b.data.data() + static_cast<size_t>(it->second) * dim_;
    }

    template <class T>
    void add(int layer, int32_t r, const T* g, double scale = 1.0) {
        S* dst = row(layer, r);
        for (int64_t k = 0; k < dim_; ++k) dst[k] += static_cast<S>(scale * double(g[k]));
    }

    const std::map<int, Bucket>& buckets() const { return buckets_; }
    int64_t dim() const { return dim_; }

    bool finite() const {
        for (const auto& [l, b] : buckets_)
            for (S x : b.data)
                if (!std::isfinite(double(x))) return false;
        return true;
    }

private:
    std::map<int, Bucket> buckets_;
    int64_t dim_ = 0;
};

// ---- cosine similarity ----

template <class S>
inline double cosine_sim(const S* a, const S* b, int64_t d) {
    const double na = std::sqrt(norm2(a, d));
    const double nb = std::sqrt(norm2(b, d));
    double s = dot(a, b, d) / (na * nb + kCosineEps);
    return std::clamp(s, -1.0, 1.0);
}

inline double cosine_sim(std::span<const double> a, std::span<const double> b) {
    return cosine_sim(a.data(), b.data(), static_cast<int64_t>(a.size()));
}

// ---- BPR ----

// -log sigmoid(x), stable for both signs.
inline double softplus_neg(double x) {
    return x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

// Summed over the batch (no averaging). Gradients land on readout rows:
// with s = sigmoid(neg - pos) per triple,
//   d/de_u = -s (e_pos - e_neg),  d/de_pos = -s e_u,  d/de_neg = +s e_u.
template <class S>
double bpr_loss(const Mat<S>& readout, int32_t num_users, const TrainBatch& batch,
                GradAccumulator<S>& acc) {
    const int64_t d = readout.cols;
    std::vector<double> terms(batch.size());
    std::vector<double> gu(static_cast<size_t>(d));
    for (size_t t = 0; t < batch.size(); ++t) {
        const int32_t u = batch.user[t];
        const int32_t ip = static_cast<int32_t>(int64_t(num_users) + batch.item_pos[t]);
        const int32_t in = static_cast<int32_t>(int64_t(num_users) + batch.item_neg[t]);
        const S* eu = readout.row(u);
        const S* ep = readout.row(ip);
        const S* en = readout.row(in);
        const double x = dot(eu, ep, d) - dot(eu, en, d);
        terms[t] = softplus_neg(x);

        const double s = 1.0 / (1.0 + std::exp(x));  // sigmoid(neg - pos)
        for (int64_t k = 0; k < d; ++k) gu[k] = double(ep[k]) - double(en[k]);
        acc.add(kReadoutLayer, u, gu.data(), -s);
        acc.add(kReadoutLayer, ip, eu, -s);
        acc.add(kReadoutLayer, in, eu, s);
    }
    return pairwise_sum(terms);
}

// ---- InfoNCE over cosine similarity ----

// Dense engine: anchors (A x d) against candidates (C x d); pos_index maps
// each anchor to its positive's slot among the candidates. Log-sum-exp is
// stabilized by the per-anchor max logit. Gradients are overwritten into
// d_anchors / d_candidates (both A|C x d, zero-initialized here).
template <class S>
double infonce_block(const S* anchors, int64_t num_a, const S* cands, int64_t num_c, int64_t d,
                     const int32_t* pos_index, double tau, S* d_anchors, S* d_cands) {
    if (tau <= 0.0) throw std::invalid_argument("infonce: temperature must be > 0");
    if (num_c < 1) throw std::invalid_argument("infonce: no candidates");

    std::fill(d_anchors, d_anchors + num_a * d, S(0));
    std::fill(d_cands, d_cands + num_c * d, S(0));

    std::vector<double> norm_a(num_a), norm_c(num_c);
    for (int64_t i = 0; i < num_a; ++i) norm_a[i] = std::sqrt(norm2(anchors + i * d, d));
    for (int64_t k = 0; k < num_c; ++k) norm_c[k] = std::sqrt(norm2(cands + k * d, d));

    std::vector<double> sims(num_c), ex(num_c);
    std::vector<double> cand_unit_coeff(num_c, 0.0);  // sum_i q_ik s_ik |a_i| / D_ik
    std::vector<double> terms(num_a);

    for (int64_t i = 0; i < num_a; ++i) {
        const S* a = anchors + i * d;
        double max_logit = -std::numeric_limits<double>::infinity();
        for (int64_t k = 0; k < num_c; ++k) {
            const double s =
                double(dot_fast(a, cands + k * d, d)) / (norm_a[i] * norm_c[k] + kCosineEps);
            sims[k] = std::clamp(s, -1.0, 1.0);
            max_logit = std::max(max_logit, sims[k] / tau);
        }
        double z = 0.0;
        for (int64_t k = 0; k < num_c; ++k) {
            ex[k] = std::exp(sims[k] / tau - max_logit);
            z += ex[k];
        }
        const double lse = max_logit + std::log(z);
        const int32_t p = pos_index[i];
        terms[i] = lse - sims[p] / tau;

        // dL/ds_k = (softmax_k - [k == p]) / tau, reusing the stabilized
        // exponentials; then through the cosine chain rule with
        // D_k = |a||c_k| + eps:
        //   dL/da   += q_k (c_k/D_k - s_k |c_k|/D_k a/|a|)
        //   dL/dc_k += q_k (a/D_k - s_k |a|/D_k c_k/|c_k|)
        S* da = d_anchors + i * d;
        double self_coeff = 0.0;
        const double inv_z_tau = 1.0 / (z * tau);
        for (int64_t k = 0; k < num_c; ++k) {
            const double q = ex[k] * inv_z_tau - (k == p ? 1.0 / tau : 0.0);
            const double dk = norm_a[i] * norm_c[k] + kCosineEps;
            const double w1 = q / dk;
            const double qs = q * sims[k] / dk;
            self_coeff += qs * norm_c[k];
            cand_unit_coeff[k] += qs * norm_a[i];
            const S w1s = static_cast<S>(w1);
            const S* c = cands + k * d;
            S* dc = d_cands + k * d;
            for (int64_t t = 0; t < d; ++t) {
                da[t] += w1s * c[t];
                dc[t] += w1s * a[t];
            }
        }
        if (norm_a[i] > 0.0) {
            const S coef = static_cast<S>(self_coeff / norm_a[i]);
            for (int64_t t = 0; t < d; ++t) da[t] -= coef * a[t];
        }
    }

    for (int64_t k = 0; k < num_c; ++k) {
        if (norm_c[k] <= 0.0) continue;
        const S coef = static_cast<S>(cand_unit_coeff[k] / norm_c[k]);
        const S* c = cands + k * d;
        S* dc = d_cands + k * d;
        for (int64_t t = 0; t < d; ++t) dc[t] -= coef * c[t];
    }
    return pairwise_sum(terms);
}

template <class S>
struct InfoNceResult {
    double value = 0.0;
    Mat<S> d_anchors;
    Mat<S> d_candidates;
};

template <class S>
InfoNceResult<S> infonce(const Mat<S>& anchors, const Mat<S>& candidates,
                         std::span<const int32_t> pos_index, double tau) {
    if (anchors.cols != candidates.cols) throw std::invalid_argument("infonce: dim mismatch");
    if (static_cast<int64_t>(pos_index.size()) != anchors.rows)
        throw std::invalid_argument("infonce: one positive per anchor required");
    for (int32_t p : pos_index)
        if (p < 0 || p >= candidates.rows)
            throw std::invalid_argument("infonce: positive not among candidates");
    InfoNceResult<S> r;
    r.d_anchors.resize(anchors.rows, anchors.cols);
    r.d_candidates.resize(candidates.rows, candidates.cols);
    r.value = infonce_block(anchors.a.data(), anchors.rows, candidates.a.data(), candidates.rows,
                            anchors.cols, pos_index.data(), tau, r.d_anchors.a.data(),
                            r.d_candidates.a.data());
    return r;
}

// ---- layer-to-layer contrasts ----

// A node representation as a weighted sum of layer outputs. Plain contrasts
// use a single (layer, 1.0) term; the U0-SumU123 positive uses the mean of
// layers 1..3.
struct LayerProfile {
    std::vector<std::pair<int, double>> terms;

    static LayerProfile single(int layer) { return {{{layer, 1.0}}}; }
    static LayerProfile mean(int from, int to) {
        LayerProfile p;
        const double w = 1.0 / (to - from + 1);
        for (int l = from; l <= to; ++l) p.terms.emplace_back(l, w);
        return p;
    }
    int max_layer() const {
        int m = 0;
        for (auto& [l, w] : terms) m = std::max(m, l);
        return m;
    }
};

namespace detail {

template <class S>
void gather_profile(const LayerStack<S>& stack, const LayerProfile& prof,
                    std::span<const int64_t> nodes, Mat<S>& out) {
    const int64_t d = stack.layers[0].cols;
    out.resize(static_cast<int64_t>(nodes.size()), d);
    out.zero();
    for (size_t r = 0; r < nodes.size(); ++r) {
        S* dst = out.row(static_cast<int64_t>(r));
        for (auto& [l, w] : prof.terms) {
            const S* src = stack.layer(l).row(nodes[r]);
            for (int64_t k = 0; k < d; ++k) dst[k] += static_cast<S>(w * double(src[k]));
        }
    }
}

template <class S>
void scatter_profile(const LayerProfile& prof, std::span<const int64_t> nodes, const Mat<S>& grads,
                     double scale, GradAccumulator<S>& acc) {
    for (size_t r = 0; r < nodes.size(); ++r) {
        for (auto& [l, w] : prof.terms) {
            acc.add(l, static_cast<int32_t>(nodes[r]), grads.row(static_cast<int64_t>(r)),
                    scale * w);
        }
    }
}

// Shared core of every contrast: anchors (with multiplicity) against the
// deduplicated candidate set containing each anchor's positive. Adds
// grad_scale * gradients into acc and returns the raw loss value.
template <class S>
double contrast_core(const LayerStack<S>& stack, const LayerProfile& anchor_prof,
                     std::span<const int64_t> anchor_nodes, const LayerProfile& cand_prof,
                     std::span<const int64_t> positive_nodes, double tau, double grad_scale,
                     GradAccumulator<S>& acc) {
    if (anchor_nodes.empty()) return 0.0;

    // Unique candidate nodes, ascending.
    std::vector<int64_t> cand_nodes(positive_nodes.begin(), positive_nodes.end());
    std::sort(cand_nodes.begin(), cand_nodes.end());
    cand_nodes.erase(std::unique(cand_nodes.begin(), cand_nodes.end()), cand_nodes.end());
    std::unordered_map<int64_t, int32_t> cand_slot;
    cand_slot.reserve(cand_nodes.size());
    for (size_t k = 0; k < cand_nodes.size(); ++k)
        cand_slot[cand_nodes[k]] = static_cast<int32_t>(k);

    std::vector<int32_t> pos_index(anchor_nodes.size());
    for (size_t i = 0; i < anchor_nodes.size(); ++i) pos_index[i] = cand_slot[positive_nodes[i]];

    Mat<S> a_mat, c_mat;
    gather_profile(stack, anchor_prof, anchor_nodes, a_mat);
    gather_profile(stack, cand_prof, cand_nodes, c_mat);

    Mat<S> da(a_mat.rows, a_mat.cols), dc(c_mat.rows, c_mat.cols);
    const double value = infonce_block(a_mat.a.data(), a_mat.rows, c_mat.a.data(), c_mat.rows,
                                       a_mat.cols, pos_index.data(), tau, da.a.data(),
                                       dc.a.data());
    if (grad_scale != 0.0) {
        scatter_profile(anchor_prof, anchor_nodes, da, grad_scale, acc);
        scatter_profile(cand_prof, cand_nodes, dc, grad_scale, acc);
    }
    return value;
}

}  // namespace detail

// Homogeneous contrast (same node type, layers m vs n): each anchor node's
// positive is itself at layer n; candidates are the unique anchor nodes.
// anchor_nodes are global row indices (users: u, items: M+i), multiplicity
// preserved.
template <class S>
double cl_homogeneous(const LayerStack<S>& stack, int m, int n,
                      std::span<const int64_t> anchor_nodes, double tau,
                      GradAccumulator<S>& acc, double grad_scale = 1.0) {
    if (m > stack.depth() || n > stack.depth())
        throw std::invalid_argument("cl_homogeneous: layer exceeds stack depth");
    return detail::contrast_core(stack, LayerProfile::single(m), anchor_nodes,
                                 LayerProfile::single(n), anchor_nodes, tau, grad_scale, acc);
}

// Heterogeneous contrast over observed (u, i) train edges: anchor is the
// item at layer m, positive the connected user at layer n, candidates the
// in-batch unique users at layer n. anchor_item=false mirrors the sides.
template <class S>
double cl_heterogeneous(const LayerStack<S>& stack, int m, int n,
                        std::span<const int32_t> users, std::span<const int32_t> items,
                        int32_t num_users, double tau, GradAccumulator<S>& acc,
                        bool anchor_item = true, double grad_scale = 1.0) {
    if (m > stack.depth() || n > stack.depth())
        throw std::invalid_argument("cl_heterogeneous: layer exceeds stack depth");
    if (users.size() != items.size())
        throw std::invalid_argument("cl_heterogeneous: users/items length mismatch");
    std::vector<int64_t> anchors(users.size()), positives(users.size());
    for (size_t t = 0; t < users.size(); ++t) {
        const int64_t unode = users[t];
        const int64_t inode = int64_t(num_users) + items[t];
        anchors[t] = anchor_item ? inode : unode;
        positives[t] = anchor_item ? unode : inode;
    }
    return detail::contrast_core(stack, LayerProfile::single(m), anchors, LayerProfile::single(n),
                                 positives, tau, grad_scale, acc);
}

// One-hop objective: alpha * user side + (1 - alpha) * item side, where the
// user side contrasts anchor e_i^(1) with positive e_u^(0) over user
// candidates and the item side mirrors it. Returns the combined raw value;
// gradients are scaled by grad_scale * side weight.
template <class S>
double one_hop_cl(const LayerStack<S>& stack, std::span<const int32_t> users,
                  std::span<const int32_t> items, int32_t num_users, double tau, double alpha,
                  GradAccumulator<S>& acc, double grad_scale = 1.0) {
    if (stack.depth() < 1) throw std::invalid_argument("one_hop_cl: stack depth must be >= 1");
    double value = 0.0;
    if (alpha != 0.0) {
        value += alpha * cl_heterogeneous(stack, 1, 0, users, items, num_users, tau, acc,
                                          /*anchor_item=*/true, grad_scale * alpha);
    }
    if (alpha != 1.0) {
        value += (1.0 - alpha) * cl_heterogeneous(stack, 1, 0, users, items, num_users, tau, acc,
                                                  /*anchor_item=*/false, grad_scale * (1.0 - alpha));
    }
    return value;
}

// Scheme dispatcher. The batch's observed edges are (user[t], item_pos[t]);
// negatives never participate in contrastive terms.
template <class S>
double scheme_loss(Scheme scheme, const LayerStack<S>& stack, const TrainBatch& batch,
                   int32_t num_users, double tau, double alpha, GradAccumulator<S>& acc,
                   double grad_scale = 1.0) {
    const int need = required_depth(scheme);
    if (stack.depth() < need) {
        throw std::invalid_argument(std::string("scheme ") + scheme_name(scheme) +
                                    " needs stack depth >= " + std::to_string(need) + ", got " +
                                    std::to_string(stack.depth()));
    }
    std::span<const int32_t> users(batch.user);
    std::span<const int32_t> items(batch.item_pos);

    auto two_sided_homogeneous = [&](const LayerProfile& anchor_prof,
                                     const LayerProfile& cand_prof) {
        std::vector<int64_t> unodes(users.begin(), users.end());
        std::vector<int64_t> inodes(items.size());
        for (size_t t = 0; t < items.size(); ++t) inodes[t] = int64_t(num_users) + items[t];
        double v = 0.0;
        if (alpha != 0.0) {
            v += alpha * detail::contrast_core(stack, anchor_prof, unodes, cand_prof, unodes, tau,
                                               grad_scale * alpha, acc);
        }
        if (alpha != 1.0) {
            v += (1.0 - alpha) * detail::contrast_core(stack, anchor_prof, inodes, cand_prof,
                                                       inodes, tau, grad_scale * (1.0 - alpha),
                                                       acc);
        }
        return v;
    };

    switch (scheme) {
        case Scheme::None:
            return 0.0;
        case Scheme::U0_I0:
            return cl_heterogeneous(stack, 0, 0, users, items, num_users, tau, acc, true,
                                    grad_scale);
        case Scheme::U1_I1:
            return cl_heterogeneous(stack, 1, 1, users, items, num_users, tau, acc, true,
                                    grad_scale);
        case Scheme::U0_I1:
            return one_hop_cl(stack, users, items, num_users, tau, alpha, acc, grad_scale);
        case Scheme::U0_U2:
            return two_sided_homogeneous(LayerProfile::single(0), LayerProfile::single(2));
        case Scheme::U0_SumU123:
            return two_sided_homogeneous(LayerProfile::single(0), LayerProfile::mean(1, 3));
    }
    return 0.0;
}

template <class S>
struct TotalLoss {
    double total = 0.0;
    double bpr = 0.0;
    double cl = 0.0;  // raw contrastive value (before lambda1)
    double reg = 0.0; // raw squared-norm value (before lambda2)
};

// Joint objective: BPR + lambda1 * CL + lambda2 * reg, where reg is the
// squared norm of the E^(0) rows touched by the batch (deduplicated).
// Gradients accumulate with the lambda weights already applied.
template <class S>
TotalLoss<S> total_loss(const LayerStack<S>& stack, int32_t num_users, const TrainBatch& batch,
                        Scheme scheme, const CLHyper& hyper, GradAccumulator<S>& acc) {
    TotalLoss<S> out;
    out.bpr = bpr_loss(stack.readout, num_users, batch, acc);

    if (scheme != Scheme::None && hyper.lambda1 != 0.0) {
        out.cl = scheme_loss(scheme, stack, batch, num_users, hyper.tau, hyper.alpha, acc,
                             hyper.lambda1);
    }

    if (hyper.lambda2 != 0.0) {
        std::vector<int32_t> rows;
        rows.reserve(batch.size() * 3);
        for (size_t t = 0; t < batch.size(); ++t) {
            rows.push_back(batch.user[t]);
            rows.push_back(static_cast<int32_t>(int64_t(num_users) + batch.item_pos[t]));
            rows.push_back(static_cast<int32_t>(int64_t(num_users) + batch.item_neg[t]));
        }
        std::sort(rows.begin(), rows.end());
        rows.erase(std::unique(rows.begin(), rows.end()), rows.end());

        const Mat<S>& e0 = stack.layers[0];
        const int64_t d = e0.cols;
        std::vector<double> terms(rows.size());
        for (size_t r = 0; r < rows.size(); ++r) {
            const S* x = e0.row(rows[r]);
            terms[r] = norm2(x, d);
            acc.add(0, rows[r], x, 2.0 * hyper.lambda2);
        }
        out.reg = pairwise_sum(terms);
    }

    out.total = out.bpr + hyper.lambda1 * out.cl + hyper.lambda2 * out.reg;
    return out;
}

}  // namespace l2cl
