#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

namespace l2cl {

// Dense row-major matrix. S is float (throughput mode) or double
// (verification mode); reductions accumulate in double either way.
template <class S>
struct Mat {
    int64_t rows = 0;
    int64_t cols = 0;
    std::vector<S> a;

    Mat() = default;
    Mat(int64_t r, int64_t c) : rows(r), cols(c), a(static_cast<size_t>(r * c), S(0)) {}

    S* row(int64_t i) { return a.data() + i * cols; }
    const S* row(int64_t i) const { return a.data() + i * cols; }
    std::span<S> row_span(int64_t i) { return {row(i), static_cast<size_t>(cols)}; }
    std::span<const S> row_span(int64_t i) const { return {row(i), static_cast<size_t>(cols)}; }

    void zero() { std::memset(a.data(), 0, a.size() * sizeof(S)); }
    void resize(int64_t r, int64_t c) {
        rows = r;
        cols = c;
        a.assign(static_cast<size_t>(r * c), S(0));
    }
    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

// 64-bit accumulation over four independent chains (keeps the fma pipeline
// full; the fixed split is deterministic).
template <class S>
inline double dot(const S* x, const S* y, int64_t n) {
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    int64_t i = 0;
    for (; i + 4 <= n; i += 4) {
        a0 += double(x[i]) * double(y[i]);
        a1 += double(x[i + 1]) * double(y[i + 1]);
        a2 += double(x[i + 2]) * double(y[i + 2]);
        a3 += double(x[i + 3]) * double(y[i + 3]);
    }
    for (; i < n; ++i) a0 += double(x[i]) * double(y[i]);
    return (a0 + a1) + (a2 + a3);
}

// Same-precision dot for throughput paths (scoring, similarity logits);
// float mode trades the 64-bit accumulator for SIMD width.
template <class S>
inline S dot_fast(const S* x, const S* y, int64_t n) {
    S a0 = S(0), a1 = S(0), a2 = S(0), a3 = S(0), a4 = S(0), a5 = S(0), a6 = S(0), a7 = S(0);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        a0 += x[i] * y[i];
        a1 += x[i + 1] * y[i + 1];
        a2 += x[i + 2] * y[i + 2];
        a3 += x[i + 3] * y[i + 3];
        a4 += x[i + 4] * y[i + 4];
        a5 += x[i + 5] * y[i + 5];
        a6 += x[i + 6] * y[i + 6];
        a7 += x[i + 7] * y[i + 7];
    }
    for (; i < n; ++i) a0 += x[i] * y[i];
    return ((a0 + a1) + (a2 + a3)) + ((a4 + a5) + (a6 + a7));
}

template <class S>
inline double norm2(const S* x, int64_t n) {
    double a0 = 0.0, a1 = 0.0;
    int64_t i = 0;
    for (; i + 2 <= n; i += 2) {
        a0 += double(x[i]) * double(x[i]);
        a1 += double(x[i + 1]) * double(x[i + 1]);
    }
    for (; i < n; ++i) a0 += double(x[i]) * double(x[i]);
    return a0 + a1;
}

// Order-independent reduction: splits recursively, so the result does not
// depend on how the input was produced or partitioned.
inline double pairwise_sum(std::span<const double> xs) {
    if (xs.size() <= 8) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    size_t half = xs.size() / 2;
    return pairwise_sum(xs.subspan(0, half)) + pairwise_sum(xs.subspan(half));
}

// Splits [0, n) into contiguous chunks, one per worker. Each chunk writes
// disjoint output, so results are identical for any worker count.
template <class Fn>
inline void parallel_for(int64_t n, int workers, Fn&& fn) {
    if (workers <= 1 || n < 2) {
        fn(int64_t(0), n);
        return;
    }
    int w = workers;
    if (int64_t(w) > n) w = static_cast<int>(n);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(w) - 1);
    int64_t chunk = (n + w - 1) / w;
    for (int t = 1; t < w; ++t) {
        int64_t lo = t * chunk;
        int64_t hi = std::min<int64_t>(lo + chunk, n);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    fn(int64_t(0), std::min<int64_t>(chunk, n));
    for (auto& th : pool) th.join();
}

// Deterministic stream splitter: derives an independent seed from a base
// seed and a stream index (splitmix64 finalizer).
inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Unbiased-enough bounded draw (128-bit multiply); avoids the
// implementation-defined behavior of std::uniform_int_distribution.
template <class Rng>
inline uint64_t bounded_rand(Rng& rng, uint64_t n) {
    return static_cast<uint64_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

// Uniform double in [0, 1) from the top 53 bits.
template <class Rng>
inline double unit_rand(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace l2cl
