#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "l2cl/data.hpp"

namespace l2cl {

// Seeded bipartite generator with planted user-preference clusters and a
// long-tail (lognormal) user degree distribution, so that runs need no
// downloads and the sparsity-group study has sparse users to report on.
struct SynthParams {
    int32_t num_users = 2000;
    int32_t num_items = 1500;
    int64_t target_interactions = 40000;
    int num_clusters = 12;
    double in_cluster_prob = 0.8;
    double degree_sigma = 0.8;  // lognormal shape; 0 = near-constant degrees
    int min_degree = 5;
    uint64_t seed = 1;
};

std::vector<RawPair> synth_interactions(const SynthParams& params);

void write_raw_pairs_tsv(const std::string& path, const std::vector<RawPair>& pairs);

}  // namespace l2cl
