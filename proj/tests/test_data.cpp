#include "doctest.h"

#include <set>
#include <sstream>

#include "l2cl/data.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace l2cl;

TEST_CASE("load_interactions parses rows and preserves order") {
    testutil::TempDir tmp("load");
    testutil::spit(tmp.str("a.tsv"), "u1\ti1\t5\nu2\ti2\t3\nu1\ti3\t1\n");
    ColumnSpec spec;
    spec.rating_col = 2;
    auto recs = load_interactions(tmp.str("a.tsv"), spec);
    REQUIRE(recs.size() == 3);
    CHECK(recs[0].user == "u1");
    CHECK(recs[0].item == "i1");
    CHECK(*recs[0].rating == doctest::Approx(5.0));
    CHECK(recs[2].item == "i3");
    CHECK(*recs[2].rating == doctest::Approx(1.0));
}

TEST_CASE("load_interactions header skip excludes the header row") {
    testutil::TempDir tmp("load");
    testutil::spit(tmp.str("h.tsv"), "user\titem\nu1\ti1\nu2\ti2\n");
    ColumnSpec spec;
    spec.skip_header = true;
    auto recs = load_interactions(tmp.str("h.tsv"), spec);
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].user == "u1");
}

TEST_CASE("load_interactions errors name the offending line") {
    testutil::TempDir tmp("load");
    testutil::spit(tmp.str("bad.tsv"), "u1\ti1\t5\nu2\ti2\tbogus\n");
    ColumnSpec spec;
    spec.rating_col = 2;
    CHECK_THROWS_WITH_AS(load_interactions(tmp.str("bad.tsv"), spec),
                         doctest::Contains("line 2"), DataError);

    testutil::spit(tmp.str("short.tsv"), "u1\ti1\nu2\n");
    ColumnSpec plain;
    CHECK_THROWS_WITH_AS(load_interactions(tmp.str("short.tsv"), plain),
                         doctest::Contains("line 2"), DataError);

    testutil::spit(tmp.str("empty.tsv"), "");
    CHECK_THROWS_AS(load_interactions(tmp.str("empty.tsv"), plain), DataError);
}

TEST_CASE("threshold_implicit keeps ratings >= theta") {
    std::vector<RatingRecord> recs;
    for (double r : {1.0, 3.0, 5.0}) recs.push_back({"u" + std::to_string(int(r)), "i", r, {}});
    CHECK(threshold_implicit(recs, 3.0).size() == 2);
    CHECK(threshold_implicit(recs, -1e300).size() == 3);
    CHECK(threshold_implicit(recs, 100.0).empty());
}

TEST_CASE("threshold_implicit passes rating-free records through") {
    std::vector<RatingRecord> recs{{"a", "x", {}, {}}, {"b", "y", {}, {}}};
    CHECK(threshold_implicit(recs, 3.0).size() == 2);
}

TEST_CASE("k_core_filter forced collapses error") {
    // Star: every item has degree 1, so k=2 on both sides empties the graph.
    std::vector<RawPair> star{{"u0", "i0"}, {"u0", "i1"}, {"u0", "i2"}};
    CHECK_THROWS_WITH_AS(k_core_filter(star, 2, 2), doctest::Contains("smaller k"), DataError);

    // Chain peeling: u1 drops (deg 1), then i0, then u0.
    std::vector<RawPair> chain{{"u0", "i0"}, {"u0", "i1"}, {"u1", "i1"}};
    CHECK_THROWS_AS(k_core_filter(chain, 2, 2), DataError);
}

TEST_CASE("k_core_filter keeps a complete bipartite core unchanged") {
    std::vector<RawPair> pairs;
    for (int u = 0; u < 3; ++u)
        for (int i = 0; i < 3; ++i)
            pairs.emplace_back("u" + std::to_string(u), "i" + std::to_string(i));
    auto out = k_core_filter(pairs, 3, 3);
    CHECK(out == pairs);
}

TEST_CASE("k_core_filter collapses duplicates before counting degrees") {
    std::vector<RawPair> pairs{{"u0", "i0"}, {"u0", "i0"}, {"u0", "i0"}};
    // Degree of u0 is 1 after dedup, so k=2 empties it.
    CHECK_THROWS_AS(k_core_filter(pairs, 2, 1), DataError);
    auto kept = k_core_filter(pairs, 1, 1);
    CHECK(kept.size() == 1);
}

TEST_CASE("k_core_filter is idempotent") {
    std::mt19937_64 rng(99);
    std::vector<RawPair> pairs;
    for (int e = 0; e < 400; ++e) {
        pairs.emplace_back("u" + std::to_string(bounded_rand(rng, 40)),
                           "i" + std::to_string(bounded_rand(rng, 30)));
    }
    auto once = k_core_filter(pairs, 3, 3);
    auto twice = k_core_filter(once, 3, 3);
    CHECK(once == twice);
}

TEST_CASE("remap_ids assigns first-appearance indices and round-trips") {
    std::vector<RawPair> pairs{{"A", "x"}, {"C", "y"}, {"A", "y"}};
    auto r = remap_ids(pairs);
    CHECK(r.maps.user_of_index == std::vector<std::string>{"A", "C"});
    CHECK(r.maps.item_of_index == std::vector<std::string>{"x", "y"});
    CHECK(r.iset.num_users == 2);
    CHECK(r.iset.num_items == 2);
    CHECK(r.iset.num_pairs() == 3);
    for (const auto& [raw, idx] : r.maps.index_of_user) CHECK(r.maps.user_of_index[idx] == raw);
    for (const auto& [raw, idx] : r.maps.index_of_item) CHECK(r.maps.item_of_index[idx] == raw);
    // Shared user -> one user index, two item indices.
    CHECK(r.iset.degree(r.maps.index_of_user.at("A")) == 2);
}

namespace {

InteractionSet one_user_iset(int n_items) {
    std::vector<std::pair<int32_t, int32_t>> pairs;
    for (int i = 0; i < n_items; ++i) pairs.emplace_back(0, i);
    return make_interaction_set(1, n_items, std::move(pairs));
}

std::string serialize_split(const SplitDataset& s) {
    std::ostringstream os;
    for (const InteractionSet* part : {&s.train, &s.valid, &s.test}) {
        for (int32_t u = 0; u < part->num_users; ++u)
            for (int32_t i : part->items_of(u)) os << u << ':' << i << ',';
        os << '|';
    }
    return os.str();
}

}  // namespace

TEST_CASE("split_user_based rounding: 10 -> 8/1/1, 1 -> 1/0/0, 5 -> 4/0/1") {
    auto check_counts = [](int n, int64_t tr, int64_t va, int64_t te) {
        auto s = split_user_based(one_user_iset(n), {0.8, 0.1, 0.1}, 7);
        CHECK(s.train.num_pairs() == tr);
        CHECK(s.valid.num_pairs() == va);
        CHECK(s.test.num_pairs() == te);
    };
    check_counts(10, 8, 1, 1);
    check_counts(1, 1, 0, 0);
    // floor(0.5) = 0 for both val and test; the n >= 3 rule forces one test item.
    check_counts(5, 4, 0, 1);
    check_counts(3, 2, 0, 1);
    check_counts(2, 2, 0, 0);
}

TEST_CASE("split_user_based is deterministic and partitions the input") {
    auto iset = oracle::random_bipartite(25, 18, 160, 5);
    auto a = split_user_based(iset, {0.8, 0.1, 0.1}, 123);
    auto b = split_user_based(iset, {0.8, 0.1, 0.1}, 123);
    CHECK(serialize_split(a) == serialize_split(b));

    auto c = split_user_based(iset, {0.8, 0.1, 0.1}, 124);
    CHECK(serialize_split(a) != serialize_split(c));

    // Disjointness and coverage, exactly.
    std::set<std::pair<int32_t, int32_t>> all;
    int64_t total = 0;
    for (const InteractionSet* part : {&a.train, &a.valid, &a.test}) {
        for (const auto& p : part->pairs()) all.insert(p);
        total += part->num_pairs();
    }
    CHECK(total == iset.num_pairs());
    CHECK(static_cast<int64_t>(all.size()) == iset.num_pairs());
    for (const auto& p : iset.pairs()) CHECK(all.count(p) == 1);

    // Every user keeps at least one training interaction.
    for (int32_t u = 0; u < iset.num_users; ++u) CHECK(a.train.degree(u) >= 1);
}

TEST_CASE("sample_bpr_batch: forced negative when only one item remains") {
    // User 0 interacted with every item except item 7.
    std::vector<std::pair<int32_t, int32_t>> pairs;
    for (int i = 0; i < 10; ++i)
        if (i != 7) pairs.emplace_back(0, i);
    auto train = make_interaction_set(1, 10, std::move(pairs));
    std::mt19937_64 rng(3);
    auto batch = sample_bpr_batch(train, 50, rng);
    REQUIRE(batch.size() == 50);
    for (int32_t neg : batch.item_neg) CHECK(neg == 7);
}

TEST_CASE("sample_bpr_batch: negatives uniform over the complement (chi-square)") {
    // One user, 40 items, 10 interacted -> 30 candidate negatives.
    std::vector<std::pair<int32_t, int32_t>> pairs;
    for (int i = 0; i < 10; ++i) pairs.emplace_back(0, i * 4);
    auto train = make_interaction_set(1, 40, std::move(pairs));

    std::mt19937_64 rng(17);
    const int64_t draws = 100000;
    std::vector<int64_t> counts(40, 0);
    TrainBatch batch;
    for (int rep = 0; rep < 10; ++rep) {
        sample_bpr_batch(train, draws / 10, rng, batch);
        for (int32_t neg : batch.item_neg) {
            REQUIRE(!train.has(0, neg));
            ++counts[neg];
        }
    }
    const double expected = double(draws) / 30.0;
    double chi2 = 0;
    int df = 0;
    for (int i = 0; i < 40; ++i) {
        if (train.has(0, i)) {
            CHECK(counts[i] == 0);
            continue;
        }
        chi2 += (counts[i] - expected) * (counts[i] - expected) / expected;
        ++df;
    }
    --df;  // multinomial constraint
    // Chi-square mean df, variance 2*df: stay within 3 sigma.
    CHECK(chi2 < df + 3.0 * std::sqrt(2.0 * df));
}

TEST_CASE("sample_bpr_batch edge cases") {
    std::mt19937_64 rng(1);
    auto train = one_user_iset(3);

    SUBCASE("B = 0 gives an empty batch") {
        auto batch = sample_bpr_batch(train, 0, rng);
        CHECK(batch.size() == 0);
    }
    SUBCASE("saturated population errors") {
        // The single user interacted with all 3 items.
        CHECK_THROWS_AS(sample_bpr_batch(train, 4, rng), DataError);
    }
    SUBCASE("saturated user skipped when another user has negatives") {
        std::vector<std::pair<int32_t, int32_t>> pairs;
        for (int i = 0; i < 3; ++i) pairs.emplace_back(0, i);
        pairs.emplace_back(1, 0);
        auto t2 = make_interaction_set(2, 3, std::move(pairs));
        auto batch = sample_bpr_batch(t2, 20, rng);
        REQUIRE(batch.size() == 20);
        for (size_t t = 0; t < batch.size(); ++t) {
            CHECK(batch.user[t] == 1);  // user 0 is saturated, always redrawn
            CHECK(!t2.has(batch.user[t], batch.item_neg[t]));
        }
    }
}

TEST_CASE("sampled negatives never appear in the user's train adjacency") {
    auto iset = oracle::random_bipartite(15, 12, 60, 8);
    std::mt19937_64 rng(44);
    TrainBatch batch;
    for (int rep = 0; rep < 20; ++rep) {
        sample_bpr_batch(iset, 64, rng, batch);
        for (size_t t = 0; t < batch.size(); ++t) {
            CHECK(iset.has(batch.user[t], batch.item_pos[t]));
            CHECK(!iset.has(batch.user[t], batch.item_neg[t]));
        }
    }
}
