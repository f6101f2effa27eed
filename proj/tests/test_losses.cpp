#include "doctest.h"

#include "l2cl/losses.hpp"
#include "l2cl/graph.hpp"
#include "oracles.hpp"

using namespace l2cl;

namespace {

// 5-user / 7-item toy pipeline shared by the loss tests.
struct Toy {
    InteractionSet train;
    PropagationOperator op;
    Mat<double> e0;
    LayerStack<double> stack;
    TrainBatch batch;

    Toy(uint64_t seed, int depth, int64_t dim = 4, int64_t batch_size = 6) {
        train = oracle::random_bipartite(5, 7, 14, seed);
        op = build_operator(train);
        e0 = init_embeddings<double>(5, 7, dim, seed + 1);
        forward(e0, op, depth, stack);
        batch = oracle::observed_batch(train, batch_size, seed + 2);
    }
};

double accum_dot_direction(const GradAccumulator<double>& acc, int layer, int32_t row,
                           const double* dir, int64_t d) {
    for (const auto& [l, b] : acc.buckets()) {
        if (l != layer) continue;
        for (size_t r = 0; r < b.rows.size(); ++r) {
            if (b.rows[r] == row) {
                double s = 0;
                for (int64_t k = 0; k < d; ++k) s += double(b.data[r * d + k]) * dir[k];
                return s;
            }
        }
    }
    return 0.0;
}

const double* accum_row(const GradAccumulator<double>& acc, int layer, int32_t row, int64_t d) {
    auto it = acc.buckets().find(layer);
    REQUIRE(it != acc.buckets().end());
    auto slot = it->second.slot.find(row);
    REQUIRE(slot != it->second.slot.end());
    return it->second.data.data() + static_cast<size_t>(slot->second) * d;
}

}  // namespace

TEST_CASE("cosine_sim hand cases") {
    std::vector<double> a{1, 1}, b{1, 0}, c{0, 2};
    CHECK(cosine_sim(a.data(), a.data(), 2) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(cosine_sim(b.data(), c.data(), 2) == doctest::Approx(0.0));
    CHECK(cosine_sim(a.data(), b.data(), 2) == doctest::Approx(1.0 / std::sqrt(2.0)));
    std::vector<double> z{0, 0};
    CHECK(cosine_sim(z.data(), a.data(), 2) == 0.0);
}

TEST_CASE("bpr_loss: equal scores give ln 2 per triple") {
    Mat<double> readout(3, 2);  // 1 user, 2 items with identical rows
    readout.row(0)[0] = 0.3;
    readout.row(1)[0] = 0.7;
    readout.row(2)[0] = 0.7;
    TrainBatch batch;
    batch.user = {0};
    batch.item_pos = {0};
    batch.item_neg = {1};
    GradAccumulator<double> acc(2);
    CHECK(bpr_loss(readout, 1, batch, acc) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("bpr_loss: a 20-point margin leaves ~2.061e-9") {
    Mat<double> readout(3, 1);
    readout.row(0)[0] = 1.0;
    readout.row(1)[0] = 20.0;
    readout.row(2)[0] = 0.0;
    TrainBatch batch;
    batch.user = {0};
    batch.item_pos = {0};
    batch.item_neg = {1};
    GradAccumulator<double> acc(1);
    // -ln sigmoid(20) = ln(1 + e^-20)
    CHECK(bpr_loss(readout, 1, batch, acc) ==
          doctest::Approx(std::log1p(std::exp(-20.0))).epsilon(1e-9));
    CHECK(bpr_loss(readout, 1, batch, acc) == doctest::Approx(2.0611536e-9).epsilon(1e-6));
}

TEST_CASE("bpr_loss matches the naive oracle and finite differences") {
    Mat<double> readout = oracle::random_mat<double>(12, 4, 19);
    TrainBatch batch;
    batch.user = {0, 2, 4};
    batch.item_pos = {1, 3, 0};
    batch.item_neg = {2, 0, 5};
    GradAccumulator<double> acc(4);
    const double value = bpr_loss(readout, 5, batch, acc);
    CHECK(value == doctest::Approx(oracle::naive_bpr(oracle::to_grid(readout), 5, batch))
                       .epsilon(1e-12));

    // Central differences on every readout coordinate the batch touches.
    const double h = 1e-6;
    for (int32_t row : {0, 2, 4, 5 + 1, 5 + 3, 5 + 0, 5 + 2, 5 + 5}) {
        for (int64_t k = 0; k < 4; ++k) {
            double& x = readout.row(row)[k];
            const double saved = x;
            x = saved + h;
            const double fp = oracle::naive_bpr(oracle::to_grid(readout), 5, batch);
            x = saved - h;
            const double fm = oracle::naive_bpr(oracle::to_grid(readout), 5, batch);
            x = saved;
            const double fd = (fp - fm) / (2 * h);
            double dir[4] = {0, 0, 0, 0};
            dir[k] = 1.0;
            const double an = accum_dot_direction(acc, kReadoutLayer, row, dir, 4);
            CHECK(std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-8}) < 1e-6);
        }
    }
}

TEST_CASE("bpr gradient triple is -sigma(neg-pos) times the score-difference gradient") {
    Mat<double> readout = oracle::random_mat<double>(5, 3, 77);
    TrainBatch batch;
    batch.user = {0};
    batch.item_pos = {0};
    batch.item_neg = {2};
    GradAccumulator<double> acc(3);
    bpr_loss(readout, 1, batch, acc);

    const double* eu = readout.row(0);
    const double* ep = readout.row(1);
    const double* en = readout.row(3);
    const double x = dot(eu, ep, 3) - dot(eu, en, 3);
    const double s = 1.0 / (1.0 + std::exp(x));  // sigma(neg - pos)

    const double* gu = accum_row(acc, kReadoutLayer, 0, 3);
    const double* gp = accum_row(acc, kReadoutLayer, 1, 3);
    const double* gn = accum_row(acc, kReadoutLayer, 3, 3);
    for (int64_t k = 0; k < 3; ++k) {
        CHECK(gu[k] == doctest::Approx(-s * (ep[k] - en[k])).epsilon(1e-12));
        CHECK(gp[k] == doctest::Approx(-s * eu[k]).epsilon(1e-12));
        CHECK(gn[k] == doctest::Approx(s * eu[k]).epsilon(1e-12));
    }
}

TEST_CASE("infonce trivial values") {
    SUBCASE("single candidate equal to the positive gives 0") {
        Mat<double> a(1, 2), c(1, 2);
        a.row(0)[0] = 1.0;
        c.row(0)[0] = 0.5;
        std::vector<int32_t> pos{0};
        auto r = infonce(a, c, pos, 0.1);
        CHECK(r.value == doctest::Approx(0.0));
    }
    SUBCASE("two candidates with equal similarity give ln 2") {
        Mat<double> a(1, 2), c(2, 2);
        a.row(0)[0] = 1.0;
        c.row(0)[0] = 2.0;   // sim 1
        c.row(1)[0] = 0.25;  // sim 1 as well
        std::vector<int32_t> pos{0};
        auto r = infonce(a, c, pos, 0.1);
        CHECK(r.value == doctest::Approx(std::log(2.0)).epsilon(1e-9));
    }
    SUBCASE("positive sim 1 vs negative sim -1 at tau 0.1") {
        Mat<double> a(1, 2), c(2, 2);
        a.row(0)[0] = 1.0;
        c.row(0)[0] = 1.0;   // sim ~1
        c.row(1)[0] = -1.0;  // sim ~-1
        std::vector<int32_t> pos{0};
        auto r = infonce(a, c, pos, 0.1);
        CHECK(r.value == doctest::Approx(std::log1p(std::exp(-20.0))).epsilon(1e-4));
    }
    SUBCASE("tau <= 0 errors") {
        Mat<double> a(1, 2), c(1, 2);
        std::vector<int32_t> pos{0};
        CHECK_THROWS_AS(infonce(a, c, pos, 0.0), std::invalid_argument);
    }
}

TEST_CASE("infonce matches the naive double loop and stays non-negative") {
    for (uint64_t seed : {4u, 5u, 6u}) {
        auto a = oracle::random_mat<double>(6, 3, seed);
        auto c = oracle::random_mat<double>(4, 3, seed + 50);
        std::vector<int32_t> pos;
        std::mt19937_64 rng(seed);
        for (int i = 0; i < 6; ++i) pos.push_back(static_cast<int32_t>(bounded_rand(rng, 4)));
        auto r = infonce(a, c, pos, 0.2);
        std::vector<int> posi(pos.begin(), pos.end());
        CHECK(std::abs(r.value -
                       oracle::naive_infonce(oracle::to_grid(a), posi, oracle::to_grid(c), 0.2)) <
              1e-10);
        CHECK(r.value >= 0.0);  // positive is among the candidates
    }
}

TEST_CASE("infonce value is invariant to uniform positive rescaling") {
    auto a = oracle::random_mat<double>(5, 4, 11);
    auto c = oracle::random_mat<double>(7, 4, 12);
    std::vector<int32_t> pos{0, 3, 2, 6, 1};
    const double base = infonce(a, c, pos, 0.1).value;
    for (double scale : {0.25, 4.2, 913.0}) {
        Mat<double> as(5, 4), cs(7, 4);
        for (size_t k = 0; k < a.a.size(); ++k) as.a[k] = scale * a.a[k];
        for (size_t k = 0; k < c.a.size(); ++k) cs.a[k] = scale * c.a[k];
        CHECK(std::abs(infonce(as, cs, pos, 0.1).value - base) < 1e-8);
    }
}

TEST_CASE("infonce log-sum-exp stabilization survives +-1000 logits") {
    // tau = 1e-3 turns cosine similarities into logits of magnitude 1000;
    // unstabilized exponentials would overflow.
    Mat<double> a(1, 2), c(3, 2);
    a.row(0)[0] = 1.0;
    c.row(0)[0] = 1.0;   // sim ~ +1 -> logit ~ +1000
    c.row(1)[0] = -1.0;  // sim ~ -1 -> logit ~ -1000
    c.row(2)[0] = 1.0;
    c.row(2)[1] = 1.0;   // sim ~ 1/sqrt(2)
    std::vector<int32_t> pos{0};
    auto r = infonce(a, c, pos, 1e-3);
    CHECK(std::isfinite(r.value));
    // Shifted evaluation: value = -s_p/tau + max + log sum exp(s_k/tau - max).
    const double s0 = cosine_sim(a.row(0), c.row(0), 2);
    const double s1 = cosine_sim(a.row(0), c.row(1), 2);
    const double s2 = cosine_sim(a.row(0), c.row(2), 2);
    const double mx = s0 / 1e-3;
    const double expect = -s0 / 1e-3 + mx +
                          std::log(std::exp(s0 / 1e-3 - mx) + std::exp(s1 / 1e-3 - mx) +
                                   std::exp(s2 / 1e-3 - mx));
    CHECK(r.value == doctest::Approx(expect).epsilon(1e-9));
    for (double g : r.d_anchors.a) CHECK(std::isfinite(g));
    for (double g : r.d_candidates.a) CHECK(std::isfinite(g));
}

TEST_CASE("cl_homogeneous: uniform logits give |batch| * ln(unique users)") {
    // Identical embeddings for every user at both layers: all sims equal.
    Mat<double> e0(12, 4);
    for (int64_t v = 0; v < 12; ++v)
        for (int64_t k = 0; k < 4; ++k) e0.row(v)[k] = 1.0 + 0.5 * double(k);
    LayerStack<double> stack;
    stack.layers = {e0, e0, e0};  // m = n with identical embeddings

    std::vector<int64_t> anchors{0, 1, 2, 0, 3};  // 5 anchors, 4 unique
    GradAccumulator<double> acc(4);
    const double v = cl_homogeneous(stack, 0, 0, anchors, 0.1, acc);
    CHECK(v == doctest::Approx(5.0 * std::log(4.0)).epsilon(1e-9));
}

TEST_CASE("cl_homogeneous: single-user batch scores 0") {
    Toy toy(22, 2);
    std::vector<int64_t> anchors{1};
    GradAccumulator<double> acc(4);
    CHECK(cl_homogeneous(toy.stack, 0, 2, anchors, 0.1, acc) == doctest::Approx(0.0));
}

TEST_CASE("cl_homogeneous matches the scalar double-loop oracle") {
    Toy toy(23, 2);
    std::vector<int64_t> anchors(toy.batch.user.begin(), toy.batch.user.end());
    GradAccumulator<double> acc(4);
    const double v = cl_homogeneous(toy.stack, 0, 2, anchors, 0.15, acc);

    std::vector<oracle::Grid> layers;
    for (int l = 0; l <= 2; ++l) layers.push_back(oracle::to_grid(toy.stack.layer(l)));
    std::vector<int> rows(toy.batch.user.begin(), toy.batch.user.end());
    CHECK(std::abs(v - oracle::naive_hetero_side(layers, 0, 2, rows, rows, 0.15)) < 1e-10);
}

TEST_CASE("cl_heterogeneous: trivial and oracle cases") {
    SUBCASE("single pair scores 0") {
        Toy toy(24, 1);
        TrainBatch one;
        one.user = {toy.batch.user[0]};
        one.item_pos = {toy.batch.item_pos[0]};
        GradAccumulator<double> acc(4);
        CHECK(cl_heterogeneous(toy.stack, 1, 0, one.user, one.item_pos, 5, 0.1, acc) ==
              doctest::Approx(0.0));
    }
    SUBCASE("anchor equidistant from both candidate users gives ln 2") {
        LayerStack<double> stack;
        Mat<double> l0(4, 2), l1(4, 2);
        // Users 0 and 1 identical at layer 0; the anchor item sees equal sims.
        l0.row(0)[0] = 1.0;
        l0.row(1)[0] = 1.0;
        l1.row(2)[0] = 0.4;
        l1.row(2)[1] = 0.4;
        stack.layers = {l0, l1};
        std::vector<int32_t> users{0, 1}, items{0, 0};
        GradAccumulator<double> acc(2);
        const double v = cl_heterogeneous(stack, 1, 0, users, items, 2, 0.1, acc);
        CHECK(v == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-9));
    }
    SUBCASE("random tiny instance vs the oracle") {
        Toy toy(25, 1);
        GradAccumulator<double> acc(4);
        const double v = cl_heterogeneous(toy.stack, 1, 0, toy.batch.user, toy.batch.item_pos, 5,
                                          0.1, acc);
        std::vector<oracle::Grid> layers{oracle::to_grid(toy.stack.layer(0)),
                                         oracle::to_grid(toy.stack.layer(1))};
        std::vector<int> irows, urows;
        for (int32_t i : toy.batch.item_pos) irows.push_back(5 + i);
        for (int32_t u : toy.batch.user) urows.push_back(u);
        CHECK(std::abs(v - oracle::naive_hetero_side(layers, 1, 0, irows, urows, 0.1)) < 1e-10);
    }
}

TEST_CASE("one_hop_cl: alpha = 1 equals the heterogeneous user side bitwise") {
    Toy toy(26, 1);
    GradAccumulator<double> a1(4), a2(4);
    const double v1 = one_hop_cl(toy.stack, toy.batch.user, toy.batch.item_pos, 5, 0.1, 1.0, a1);
    const double v2 =
        cl_heterogeneous(toy.stack, 1, 0, toy.batch.user, toy.batch.item_pos, 5, 0.1, a2);
    CHECK(v1 == v2);  // bitwise
    CHECK(a1.buckets().size() == a2.buckets().size());
    for (const auto& [l, b] : a1.buckets()) {
        const auto& b2 = a2.buckets().at(l);
        CHECK(b.rows == b2.rows);
        CHECK(b.data == b2.data);  // bitwise
    }
}

TEST_CASE("one_hop_cl: symmetric single-edge graph scores 0") {
    auto train = make_interaction_set(1, 1, {{0, 0}});
    auto op = build_operator(train);
    auto e0 = oracle::random_mat<double>(2, 3, 31);
    LayerStack<double> stack;
    forward(e0, op, 1, stack);
    std::vector<int32_t> users{0}, items{0};
    GradAccumulator<double> acc(3);
    CHECK(one_hop_cl(stack, users, items, 1, 0.1, 0.5, acc) == doctest::Approx(0.0));
}

TEST_CASE("one_hop_cl: 4-edge toy matches the independent scalar oracle") {
    auto train = make_interaction_set(3, 3, {{0, 0}, {0, 1}, {1, 1}, {2, 2}});
    auto op = build_operator(train);
    auto e0 = oracle::random_mat<double>(6, 4, 33);
    LayerStack<double> stack;
    forward(e0, op, 1, stack);
    std::vector<int32_t> users{0, 0, 1, 2}, items{0, 1, 1, 2};
    GradAccumulator<double> acc(4);
    const double v = one_hop_cl(stack, users, items, 3, 0.12, 0.5, acc);

    std::vector<oracle::Grid> layers{oracle::to_grid(stack.layer(0)),
                                     oracle::to_grid(stack.layer(1))};
    std::vector<int> urows{0, 0, 1, 2}, irows{3, 4, 4, 5};
    const double expect = 0.5 * oracle::naive_hetero_side(layers, 1, 0, irows, urows, 0.12) +
                          0.5 * oracle::naive_hetero_side(layers, 1, 0, urows, irows, 0.12);
    CHECK(std::abs(v - expect) < 1e-10);
}

TEST_CASE("scheme_loss: dispatch identities and depth errors") {
    Toy toy(27, 3);
    SUBCASE("U0_I1 output equals one_hop_cl bitwise") {
        GradAccumulator<double> a1(4), a2(4);
        const double v1 = scheme_loss(Scheme::U0_I1, toy.stack, toy.batch, 5, 0.1, 0.4, a1);
        const double v2 =
            one_hop_cl(toy.stack, toy.batch.user, toy.batch.item_pos, 5, 0.1, 0.4, a2);
        CHECK(v1 == v2);
        for (const auto& [l, b] : a1.buckets()) CHECK(b.data == a2.buckets().at(l).data);
    }
    SUBCASE("U0_U2 with layer 2 equal to layer 0 reduces to the m=n=0 case") {
        LayerStack<double> stack = toy.stack;
        stack.layers[2] = stack.layers[0];
        GradAccumulator<double> a1(4), a2(4);
        const double v1 = scheme_loss(Scheme::U0_U2, stack, toy.batch, 5, 0.1, 0.5, a1);

        std::vector<int64_t> unodes(toy.batch.user.begin(), toy.batch.user.end());
        std::vector<int64_t> inodes;
        for (int32_t i : toy.batch.item_pos) inodes.push_back(5 + i);
        const double v2 = 0.5 * cl_homogeneous(stack, 0, 0, unodes, 0.1, a2, 0.5) +
                          0.5 * cl_homogeneous(stack, 0, 0, inodes, 0.1, a2, 0.5);
        CHECK(v1 == doctest::Approx(v2).epsilon(1e-15));
    }
    SUBCASE("insufficient depth names the required depth") {
        Toy shallow(28, 1);
        GradAccumulator<double> acc(4);
        CHECK_THROWS_WITH_AS(
            scheme_loss(Scheme::U0_SumU123, shallow.stack, shallow.batch, 5, 0.1, 0.5, acc),
            doctest::Contains("3"), std::invalid_argument);
    }
}

TEST_CASE("all five schemes match their scalar oracles") {
    for (uint64_t seed : {41u, 42u, 43u}) {
        Toy toy(seed, 3);
        std::vector<oracle::Grid> layers;
        for (int l = 0; l <= 3; ++l) layers.push_back(oracle::to_grid(toy.stack.layer(l)));
        for (Scheme s : {Scheme::U0_I0, Scheme::U1_I1, Scheme::U0_I1, Scheme::U0_U2,
                         Scheme::U0_SumU123}) {
            GradAccumulator<double> acc(4);
            const double v = scheme_loss(s, toy.stack, toy.batch, 5, 0.1, 0.35, acc);
            const double expect = oracle::naive_scheme(s, layers, toy.batch, 5, 0.1, 0.35);
            CHECK(std::abs(v - expect) < 1e-10);
        }
    }
}

TEST_CASE("total_loss reductions and composition") {
    Toy toy(51, 1);
    SUBCASE("lambda1 = lambda2 = 0 equals plain BPR") {
        CLHyper hyper{0.1, 0.5, 0.0, 0.0};
        GradAccumulator<double> a1(4), a2(4);
        auto t = total_loss(toy.stack, 5, toy.batch, Scheme::U0_I1, hyper, a1);
        const double bpr = bpr_loss(toy.stack.readout, 5, toy.batch, a2);
        CHECK(t.total == bpr);
        CHECK(t.cl == 0.0);
        CHECK(t.reg == 0.0);
    }
    SUBCASE("all-zero embeddings contribute no regularizer") {
        LayerStack<double> stack;
        Mat<double> z(12, 4);
        stack.layers = {z, z};
        stack.readout = z;
        CLHyper hyper{0.1, 0.5, 0.0, 0.5};
        GradAccumulator<double> acc(4);
        auto t = total_loss(stack, 5, toy.batch, Scheme::None, hyper, acc);
        CHECK(t.reg == 0.0);
    }
    SUBCASE("component arithmetic: total = bpr + l1*cl + l2*reg") {
        CLHyper hyper{0.1, 0.4, 0.7, 0.01};
        GradAccumulator<double> acc(4);
        auto t = total_loss(toy.stack, 5, toy.batch, Scheme::U0_I1, hyper, acc);
        CHECK(t.total == doctest::Approx(t.bpr + 0.7 * t.cl + 0.01 * t.reg).epsilon(1e-12));
        CHECK(t.cl > 0.0);
        CHECK(t.reg > 0.0);
    }
}

TEST_CASE("GradAccumulator accumulates by (layer, row) with scaling") {
    GradAccumulator<double> acc(2);
    double g1[2] = {1.0, -2.0};
    double g2[2] = {0.5, 0.5};
    acc.add(0, 7, g1);
    acc.add(0, 7, g2, 2.0);
    acc.add(1, 7, g1, -1.0);
    const double* r0 = accum_row(acc, 0, 7, 2);
    CHECK(r0[0] == doctest::Approx(2.0));
    CHECK(r0[1] == doctest::Approx(-1.0));
    const double* r1 = accum_row(acc, 1, 7, 2);
    CHECK(r1[0] == doctest::Approx(-1.0));
    CHECK(acc.finite());

    acc.clear();
    CHECK(acc.buckets().at(0).rows.empty());
}
