#include "l2cl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace l2cl {

namespace {

std::vector<std::string> split_fields(const std::string& line, char delim) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t pos = line.find(delim, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

bool parse_double(const std::string& s, double& out) {
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

bool parse_int64(const std::string& s, int64_t& out) {
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

}  // namespace

std::vector<RatingRecord> load_interactions(const std::string& path, const ColumnSpec& spec) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open interaction file: " + path);

    std::vector<RatingRecord> records;
    std::string line;
    int64_t line_no = 0;
    int max_col = std::max({spec.user_col, spec.item_col, spec.rating_col, spec.time_col});
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (spec.skip_header && line_no == 1) continue;

        auto fields = split_fields(line, spec.delimiter);
        if (static_cast<int>(fields.size()) <= max_col) {
            throw DataError("line " + std::to_string(line_no) + ": expected at least " +
                            std::to_string(max_col + 1) + " columns, got " +
                            std::to_string(fields.size()));
        }
        RatingRecord rec;
        rec.user = fields[spec.user_col];
        rec.item = fields[spec.item_col];
        if (rec.user.empty() || rec.item.empty()) {
            throw DataError("line " + std::to_string(line_no) + ": empty user or item id");
        }
        if (spec.rating_col >= 0) {
            double r;
            if (!parse_double(fields[spec.rating_col], r) || !std::isfinite(r)) {
                throw DataError("line " + std::to_string(line_no) + ": non-numeric rating '" +
                                fields[spec.rating_col] + "'");
            }
            rec.rating = r;
        }
        if (spec.time_col >= 0) {
            int64_t t;
            if (!parse_int64(fields[spec.time_col], t)) {
                throw DataError("line " + std::to_string(line_no) + ": non-integer timestamp '" +
                                fields[spec.time_col] + "'");
            }
            rec.timestamp = t;
        }
        records.push_back(std::move(rec));
    }
    if (records.empty()) throw DataError("no interaction rows in file: " + path);
    return records;
}

std::vector<RawPair> threshold_implicit(const std::vector<RatingRecord>& records, double theta) {
    std::vector<RawPair> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        if (!r.rating.has_value() || *r.rating >= theta) out.emplace_back(r.user, r.item);
    }
    return out;
}

std::vector<RawPair> k_core_filter(const std::vector<RawPair>& pairs, int k_user, int k_item) {
    if (k_user < 1 || k_item < 1) throw DataError("k-core thresholds must be >= 1");

    // Dedup first (R is binary), keeping first-occurrence order.
    std::unordered_map<std::string, int32_t> uid, iid;
    struct Edge {
        int32_t u, i;
        size_t orig;
    };
    std::vector<Edge> edges;
    {
        std::unordered_set<uint64_t> seen;
        for (size_t k = 0; k < pairs.size(); ++k) {
            auto [uit, unew] = uid.try_emplace(pairs[k].first, static_cast<int32_t>(uid.size()));
            auto [iit, inew] = iid.try_emplace(pairs[k].second, static_cast<int32_t>(iid.size()));
            uint64_t key = (static_cast<uint64_t>(uit->second) << 32) |
                           static_cast<uint32_t>(iit->second);
            if (seen.insert(key).second) edges.push_back({uit->second, iit->second, k});
        }
    }

    std::vector<int64_t> udeg(uid.size(), 0), ideg(iid.size(), 0);
    std::vector<char> alive(edges.size(), 1);
    for (const auto& e : edges) {
        ++udeg[e.u];
        ++ideg[e.i];
    }

    // Peel to the fixed point. The k-core is unique, so the sweep order is
    // irrelevant to the result.
    bool changed = true;
    while (changed) {
        changed = false;
        for (size_t k = 0; k < edges.size(); ++k) {
            if (!alive[k]) continue;
            const auto& e = edges[k];
            if (udeg[e.u] < k_user || ideg[e.i] < k_item) {
                alive[k] = 0;
                --udeg[e.u];
                --ideg[e.i];
                changed = true;
            }
        }
    }

    std::vector<RawPair> out;
    for (size_t k = 0; k < edges.size(); ++k) {
        if (alive[k]) out.push_back(pairs[edges[k].orig]);
    }
    if (out.empty()) {
        throw DataError("k-core filtering (k_user=" + std::to_string(k_user) +
                        ", k_item=" + std::to_string(k_item) +
                        ") removed every interaction; use a smaller k");
    }
    return out;
}

bool InteractionSet::has(int32_t u, int32_t i) const {
    auto row = items_of(u);
    return std::binary_search(row.begin(), row.end(), i);
}

std::vector<std::pair<int32_t, int32_t>> InteractionSet::pairs() const {
    std::vector<std::pair<int32_t, int32_t>> out;
    out.reserve(items.size());
    for (int32_t u = 0; u < num_users; ++u) {
        for (int32_t i : items_of(u)) out.emplace_back(u, i);
    }
    return out;
}

InteractionSet make_interaction_set(int32_t num_users, int32_t num_items,
                                    std::vector<std::pair<int32_t, int32_t>> pairs) {
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

    InteractionSet s;
    s.num_users = num_users;
    s.num_items = num_items;
    s.offsets.assign(static_cast<size_t>(num_users) + 1, 0);
    for (const auto& [u, i] : pairs) {
        if (u < 0 || u >= num_users || i < 0 || i >= num_items)
            throw DataError("interaction index out of range");
        ++s.offsets[static_cast<size_t>(u) + 1];
    }
    for (size_t k = 1; k < s.offsets.size(); ++k) s.offsets[k] += s.offsets[k - 1];
    s.items.resize(pairs.size());
    {
        std::vector<int64_t> cursor(s.offsets.begin(), s.offsets.end() - 1);
        for (const auto& [u, i] : pairs) s.items[cursor[u]++] = i;
    }
    return s;
}

RemapResult remap_ids(const std::vector<RawPair>& pairs) {
    if (pairs.empty()) throw DataError("cannot remap an empty pair list");
    RemapResult r;
    std::vector<std::pair<int32_t, int32_t>> indexed;
    indexed.reserve(pairs.size());
    for (const auto& [user, item] : pairs) {
        auto [uit, unew] =
            r.maps.index_of_user.try_emplace(user, static_cast<int32_t>(r.maps.user_of_index.size()));
        if (unew) r.maps.user_of_index.push_back(user);
        auto [iit, inew] =
            r.maps.index_of_item.try_emplace(item, static_cast<int32_t>(r.maps.item_of_index.size()));
        if (inew) r.maps.item_of_index.push_back(item);
        indexed.emplace_back(uit->second, iit->second);
    }
    r.iset = make_interaction_set(static_cast<int32_t>(r.maps.user_of_index.size()),
                                  static_cast<int32_t>(r.maps.item_of_index.size()),
                                  std::move(indexed));
    return r;
}

SplitDataset split_user_based(const InteractionSet& iset, std::array<double, 3> ratios,
                              uint64_t seed) {
    double sum = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(sum - 1.0) > 1e-9) throw DataError("split ratios must sum to 1");

    std::vector<std::pair<int32_t, int32_t>> tr, va, te;
    for (int32_t u = 0; u < iset.num_users; ++u) {
        auto row = iset.items_of(u);
        std::vector<int32_t> shuffled(row.begin(), row.end());
        std::mt19937_64 rng(mix_seed(seed, static_cast<uint64_t>(u)));
        for (size_t k = shuffled.size(); k > 1; --k) {
            size_t j = static_cast<size_t>(bounded_rand(rng, k));
            std::swap(shuffled[k - 1], shuffled[j]);
        }

        int64_t n = static_cast<int64_t>(shuffled.size());
        int64_t n_val = static_cast<int64_t>(ratios[1] * static_cast<double>(n));
        int64_t n_test = static_cast<int64_t>(ratios[2] * static_cast<double>(n));
        if (n >= 3 && ratios[2] > 0.0 && n_test == 0) n_test = 1;
        // Never starve train.
        while (n - n_val - n_test < 1 && n_test > 0) --n_test;
        while (n - n_val - n_test < 1 && n_val > 0) --n_val;

        int64_t n_train = n - n_val - n_test;
        for (int64_t k = 0; k < n; ++k) {
            auto& dst = k < n_train ? tr : (k < n_train + n_val ? va : te);
            dst.emplace_back(u, shuffled[k]);
        }
    }

    SplitDataset out;
    out.split_seed = seed;
    out.train = make_interaction_set(iset.num_users, iset.num_items, std::move(tr));
    out.valid = make_interaction_set(iset.num_users, iset.num_items, std::move(va));
    out.test = make_interaction_set(iset.num_users, iset.num_items, std::move(te));
    return out;
}

void sample_bpr_batch(const InteractionSet& train, int64_t batch_size, std::mt19937_64& rng,
                      TrainBatch& out) {
    out.clear();
    if (train.num_pairs() == 0) throw DataError("cannot sample from an empty training set");
    if (batch_size <= 0) return;

    bool any_unsaturated = false;
    for (int32_t u = 0; u < train.num_users && !any_unsaturated; ++u) {
        if (train.degree(u) < train.num_items) any_unsaturated = true;
    }
    if (!any_unsaturated)
        throw DataError("every user interacted with every item; no negatives exist");

    const int64_t num_pairs = train.num_pairs();
    out.user.reserve(batch_size);
    out.item_pos.reserve(batch_size);
    out.item_neg.reserve(batch_size);

    int64_t drawn = 0;
    while (drawn < batch_size) {
        int64_t p = static_cast<int64_t>(bounded_rand(rng, static_cast<uint64_t>(num_pairs)));
        // Locate the owning user of the p-th pair.
        auto it = std::upper_bound(train.offsets.begin(), train.offsets.end(), p);
        int32_t u = static_cast<int32_t>(it - train.offsets.begin() - 1);
        int32_t i_pos = train.items[p];

        auto row = train.items_of(u);
        if (static_cast<int64_t>(row.size()) >= train.num_items) continue;  // saturated: redraw

        int32_t i_neg = -1;
        for (int tries = 0; tries < 100; ++tries) {
            int32_t cand =
                static_cast<int32_t>(bounded_rand(rng, static_cast<uint64_t>(train.num_items)));
            if (!std::binary_search(row.begin(), row.end(), cand)) {
                i_neg = cand;
                break;
            }
        }
        if (i_neg < 0) {
            // Dense user: enumerate the complement and pick uniformly.
            std::vector<int32_t> complement;
            complement.reserve(train.num_items - row.size());
            size_t r = 0;
            for (int32_t i = 0; i < train.num_items; ++i) {
                if (r < row.size() && row[r] == i) {
                    ++r;
                } else {
                    complement.push_back(i);
                }
            }
            i_neg = complement[bounded_rand(rng, complement.size())];
        }

        out.user.push_back(u);
        out.item_pos.push_back(i_pos);
        out.item_neg.push_back(i_neg);
        ++drawn;
    }
}

}  // namespace l2cl
