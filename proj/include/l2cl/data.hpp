#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "l2cl/matrix.hpp"

namespace l2cl {

struct RatingRecord {
    std::string user;
    std::string item;
    std::optional<double> rating;
    std::optional<int64_t> timestamp;
};

// Column layout of a delimiter-separated interaction file. Columns are
// 0-based; -1 marks an absent column.
struct ColumnSpec {
    char delimiter = '\t';
    int user_col = 0;
    int item_col = 1;
    int rating_col = -1;
    int time_col = -1;
    bool skip_header = false;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using RawPair = std::pair<std::string, std::string>;

std::vector<RatingRecord> load_interactions(const std::string& path, const ColumnSpec& spec);

// Keeps records with rating >= theta; records without a rating pass through
// (pure-implicit sources).
std::vector<RawPair> threshold_implicit(const std::vector<RatingRecord>& records, double theta);

// Deduplicates, then iteratively peels users with degree < k_user and items
// with degree < k_item until the fixed point. Surviving pairs keep input
// order. Throws DataError if nothing survives.
std::vector<RawPair> k_core_filter(const std::vector<RawPair>& pairs, int k_user, int k_item);

// Deduplicated implicit-feedback pairs over contiguous indices, stored as
// sorted per-user adjacency (CSR over users).
struct InteractionSet {
    int32_t num_users = 0;
    int32_t num_items = 0;
    std::vector<int64_t> offsets;  // size num_users + 1
    std::vector<int32_t> items;    // sorted within each user row

    int64_t num_pairs() const { return static_cast<int64_t>(items.size()); }
    std::span<const int32_t> items_of(int32_t u) const {
        return {items.data() + offsets[u], static_cast<size_t>(offsets[u + 1] - offsets[u])};
    }
    int64_t degree(int32_t u) const { return offsets[u + 1] - offsets[u]; }
    bool has(int32_t u, int32_t i) const;
    std::vector<std::pair<int32_t, int32_t>> pairs() const;
};

InteractionSet make_interaction_set(int32_t num_users, int32_t num_items,
                                    std::vector<std::pair<int32_t, int32_t>> pairs);

struct IdMaps {
    std::vector<std::string> user_of_index;
    std::vector<std::string> item_of_index;
    std::unordered_map<std::string, int32_t> index_of_user;
    std::unordered_map<std::string, int32_t> index_of_item;
};

struct RemapResult {
    InteractionSet iset;
    IdMaps maps;
};

// Users and items are indexed independently in first-appearance order.
RemapResult remap_ids(const std::vector<RawPair>& pairs);

struct SplitDataset {
    InteractionSet train;
    InteractionSet valid;
    InteractionSet test;
    uint64_t split_seed = 0;
    int32_t num_users() const { return train.num_users; }
    int32_t num_items() const { return train.num_items; }
};

// Per-user seeded shuffle, then n_val = floor(r_val*n), n_test = floor(r_test*n)
// with n_test forced to 1 when n >= 3 and r_test > 0; train takes the rest and
// always keeps at least one interaction.
SplitDataset split_user_based(const InteractionSet& iset, std::array<double, 3> ratios,
                              uint64_t seed);

struct TrainBatch {
    std::vector<int32_t> user;
    std::vector<int32_t> item_pos;
    std::vector<int32_t> item_neg;
    size_t size() const { return user.size(); }
    void clear() {
        user.clear();
        item_pos.clear();
        item_neg.clear();
    }
};

// B observed pairs uniform with replacement; negatives by rejection sampling
// (up to 100 tries) then a linear scan of the complement. A user whose train
// row covers every item is skipped and the pair redrawn.
void sample_bpr_batch(const InteractionSet& train, int64_t batch_size, std::mt19937_64& rng,
                      TrainBatch& out);

inline TrainBatch sample_bpr_batch(const InteractionSet& train, int64_t batch_size,
                                   std::mt19937_64& rng) {
    TrainBatch b;
    sample_bpr_batch(train, batch_size, rng, b);
    return b;
}

}  // namespace l2cl
