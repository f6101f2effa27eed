#include "l2cl/synth.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <unordered_set>

#include "l2cl/matrix.hpp"

namespace l2cl {

std::vector<RawPair> synth_interactions(const SynthParams& p) {
    if (p.num_users < 1 || p.num_items < 1 || p.num_clusters < 1)
        throw std::invalid_argument("synth: counts must be positive");

    std::mt19937_64 rng(mix_seed(p.seed, 0));

    // Item i belongs to cluster i % C. Each user has a primary and a
    // secondary preferred cluster; inside a cluster, item popularity follows
    // a Zipf-like curve so rankings have structure beyond cluster identity.
    std::vector<int> primary(p.num_users), secondary(p.num_users);
    for (int32_t u = 0; u < p.num_users; ++u) {
        primary[u] = static_cast<int>(bounded_rand(rng, p.num_clusters));
        secondary[u] = static_cast<int>(bounded_rand(rng, p.num_clusters));
    }

    std::vector<std::vector<int32_t>> cluster_items(p.num_clusters);
    for (int32_t i = 0; i < p.num_items; ++i) cluster_items[i % p.num_clusters].push_back(i);

    // Cumulative Zipf weights (exponent 0.8) per cluster position.
    size_t max_cluster = 0;
    for (const auto& ci : cluster_items) max_cluster = std::max(max_cluster, ci.size());
    std::vector<double> zipf_cum(max_cluster + 1, 0.0);
    for (size_t r = 0; r < max_cluster; ++r)
        zipf_cum[r + 1] = zipf_cum[r] + 1.0 / std::pow(static_cast<double>(r + 1), 0.8);

    auto draw_from_cluster = [&](int c) {
        const auto& items = cluster_items[c];
        const double total = zipf_cum[items.size()];
        const double x = unit_rand(rng) * total;
        size_t lo = 0, hi = items.size();
        while (lo + 1 < hi) {
            const size_t mid = (lo + hi) / 2;
            (zipf_cum[mid] <= x ? lo : hi) = mid;
        }
        return items[lo];
    };

    // Lognormal degrees with unit mean multiplier, scaled to the target.
    const double mean_deg =
        static_cast<double>(p.target_interactions) / static_cast<double>(p.num_users);
    std::vector<int> degree(p.num_users);
    for (int32_t u = 0; u < p.num_users; ++u) {
        const double z1 = unit_rand(rng), z2 = unit_rand(rng);
        const double z =
            std::sqrt(-2.0 * std::log(std::max(z1, 1e-300))) * std::cos(2.0 * M_PI * z2);
        const double mult = std::exp(p.degree_sigma * z - 0.5 * p.degree_sigma * p.degree_sigma);
        int deg = static_cast<int>(std::llround(mean_deg * mult));
        deg = std::max(deg, p.min_degree);
        deg = std::min(deg, p.num_items / 2);
        degree[u] = deg;
    }

    std::vector<RawPair> pairs;
    pairs.reserve(static_cast<size_t>(p.target_interactions));
    std::unordered_set<int32_t> seen;
    for (int32_t u = 0; u < p.num_users; ++u) {
        seen.clear();
        int drawn = 0, attempts = 0;
        const int max_attempts = degree[u] * 50 + 1000;
        while (drawn < degree[u] && attempts < max_attempts) {
            ++attempts;
            int32_t item;
            const double x = unit_rand(rng);
            if (x < p.in_cluster_prob * 0.75) {
                item = draw_from_cluster(primary[u]);
            } else if (x < p.in_cluster_prob) {
                item = draw_from_cluster(secondary[u]);
            } else {
                item = static_cast<int32_t>(bounded_rand(rng, p.num_items));
            }
            if (seen.insert(item).second) {
                pairs.emplace_back("u" + std::to_string(u), "i" + std::to_string(item));
                ++drawn;
            }
        }
    }
    return pairs;
}

void write_raw_pairs_tsv(const std::string& path, const std::vector<RawPair>& pairs) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write: " + path);
    for (const auto& [u, i] : pairs) out << u << '\t' << i << '\n';
    if (!out) throw std::runtime_error("short write: " + path);
}

}  // namespace l2cl
