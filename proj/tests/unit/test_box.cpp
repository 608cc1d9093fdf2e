#include <doctest.h>

#include <cmath>
#include <vector>

#include "ptbox/box.hpp"
#include "ptbox/errors.hpp"
#include "ptbox/rng.hpp"

using namespace ptbox;

namespace {

GumbelBox random_box(Rng& rng, size_t d, double beta, double lo = -2.0,
                     double hi = 2.0) {
    GumbelBox b;
    b.beta = beta;
    b.mu_min.resize(d);
    b.mu_max.resize(d);
    for (size_t i = 0; i < d; ++i) {
        double a = rng.uniform(lo, hi), c = rng.uniform(lo, hi);
        b.mu_min[i] = std::min(a, c);
        b.mu_max[i] = std::max(a, c);
    }
    return b;
}

// Exact hyperrectangle volume: the beta -> 0 limit of the expected volume.
double hard_log_volume(const GumbelBox& b) {
    double acc = 0.0;
    for (size_t i = 0; i < b.dim(); ++i) {
        double side = b.mu_max[i] - b.mu_min[i];
        if (side <= 0.0) return -std::numeric_limits<double>::infinity();
        acc += std::log(side);
    }
    return acc;
}

}  // namespace

TEST_CASE("hard meet and join are exact interval intersection and hull") {
    GumbelBox a{{0.0}, {2.0}, 1.0};
    GumbelBox b{{1.0}, {3.0}, 1.0};
    auto m = meet(a, b, MeetMode::Hard);
    CHECK(m.mu_min[0] == 1.0);
    CHECK(m.mu_max[0] == 2.0);
    auto j = join(a, b, MeetMode::Hard);
    CHECK(j.mu_min[0] == 0.0);
    CHECK(j.mu_max[0] == 3.0);

    // Disjoint intervals invert: the implicit empty box.
    GumbelBox c{{2.5}, {3.5}, 1.0};
    auto empty = meet(a, c, MeetMode::Hard);
    CHECK(empty.mu_min[0] == 2.5);
    CHECK(empty.mu_max[0] == 2.0);
    CHECK(count_inverted(empty) == 1);
    CHECK(expected_volume(empty).log_volume < expected_volume(a).log_volume);
}

TEST_CASE("hard meet/join are idempotent, commutative, associative") {
    Rng rng(61);
    for (int trial = 0; trial < 50; ++trial) {
        auto a = random_box(rng, 4, 0.7);
        auto b = random_box(rng, 4, 0.7);
        auto c = random_box(rng, 4, 0.7);
        for (auto mode : {MeetMode::Hard, MeetMode::Gumbel}) {
            auto ab = meet(a, b, mode);
            auto ba = meet(b, a, mode);
            auto abc1 = meet(ab, c, mode);
            auto abc2 = meet(a, meet(b, c, mode), mode);
            for (size_t i = 0; i < 4; ++i) {
                CHECK(ab.mu_min[i] == doctest::Approx(ba.mu_min[i]).epsilon(1e-10));
                CHECK(abc1.mu_min[i] ==
                      doctest::Approx(abc2.mu_min[i]).epsilon(1e-10));
                CHECK(abc1.mu_max[i] ==
                      doctest::Approx(abc2.mu_max[i]).epsilon(1e-10));
            }
        }
        auto self = meet(a, a, MeetMode::Hard);
        auto hull = join(a, a, MeetMode::Hard);
        for (size_t i = 0; i < 4; ++i) {
            CHECK(self.mu_min[i] == a.mu_min[i]);
            CHECK(self.mu_max[i] == a.mu_max[i]);
            CHECK(hull.mu_min[i] == a.mu_min[i]);
            CHECK(hull.mu_max[i] == a.mu_max[i]);
        }
    }
}

TEST_CASE("gumbel join(a,a) displaces corners outward by exactly beta*log2") {
    Rng rng(62);
    auto a = random_box(rng, 3, 0.25);
    auto j = join(a, a, MeetMode::Gumbel);
    auto m = meet(a, a, MeetMode::Gumbel);
    const double d = 0.25 * std::log(2.0);
    for (size_t i = 0; i < 3; ++i) {
        CHECK(j.mu_min[i] == doctest::Approx(a.mu_min[i] - d).epsilon(1e-12));
        CHECK(j.mu_max[i] == doctest::Approx(a.mu_max[i] + d).epsilon(1e-12));
        // Meet's smoothed max/min push inward-facing corners the other way.
        CHECK(m.mu_min[i] == doctest::Approx(a.mu_min[i] + d).epsilon(1e-12));
        CHECK(m.mu_max[i] == doctest::Approx(a.mu_max[i] - d).epsilon(1e-12));
    }
}

TEST_CASE("gumbel meet converges to hard meet as beta shrinks") {
    Rng rng(63);
    for (int trial = 0; trial < 100; ++trial) {
        auto a = random_box(rng, 3, 1e-6);
        auto b = random_box(rng, 3, 1e-6);
        auto g = meet(a, b, MeetMode::Gumbel);
        auto h = meet(a, b, MeetMode::Hard);
        for (size_t i = 0; i < 3; ++i) {
            CHECK(std::abs(g.mu_min[i] - h.mu_min[i]) < 1e-4);
            CHECK(std::abs(g.mu_max[i] - h.mu_max[i]) < 1e-4);
        }
    }
}

TEST_CASE("expected volume reproduces the closed-form softplus values") {
    // d=1, beta=1, side exactly 2*gamma: softplus(0) = log 2.
    GumbelBox b1{{0.0}, {2.0 * kEulerGamma}, 1.0};
    CHECK(expected_volume(b1).log_volume ==
          doctest::Approx(std::log(std::log(2.0))).epsilon(1e-12));

    // d=1, beta=0.01, unit side.
    GumbelBox b2{{0.0}, {1.0}, 0.01};
    double expect = 0.01 * boxkernel::softplus(100.0 - 2.0 * kEulerGamma);
    CHECK(std::exp(expected_volume(b2).log_volume) ==
          doctest::Approx(expect).epsilon(1e-12));
    CHECK(expect == doctest::Approx(0.988456).epsilon(1e-4));

    // Product structure: multi-d log-volume is the sum of per-dim factors.
    GumbelBox b3{{0.0, 1.0}, {2.0 * kEulerGamma, 1.0 + 2.0 * kEulerGamma}, 1.0};
    auto v = expected_volume(b3, true);
    REQUIRE(v.per_dim.size() == 2);
    CHECK(v.log_volume == doctest::Approx(v.per_dim[0] + v.per_dim[1]));
    CHECK(v.log_volume == doctest::Approx(2.0 * std::log(std::log(2.0))).epsilon(1e-12));
}

TEST_CASE("small-beta expected volume matches the exact hyperrectangle oracle") {
    Rng rng(64);
    for (int trial = 0; trial < 200; ++trial) {
        GumbelBox b;
        b.beta = 1e-3;
        for (int i = 0; i < 3; ++i) {
            double lo = rng.uniform(-2.0, 2.0);
            b.mu_min.push_back(lo);
            b.mu_max.push_back(lo + rng.uniform(1.0, 3.0));
        }
        double got = expected_volume(b).log_volume;
        double want = hard_log_volume(b);
        CHECK(std::abs(std::exp(got) - std::exp(want)) < 0.01 * std::exp(want));
    }
}

TEST_CASE("volume is monotone in the corners and translation invariant") {
    Rng rng(65);
    for (int trial = 0; trial < 50; ++trial) {
        auto b = random_box(rng, 4, 0.3);
        double base = expected_volume(b).log_volume;

        auto grown = b;
        grown.mu_max[trial % 4] += 0.1;
        CHECK(expected_volume(grown).log_volume >= base);
        auto shrunk = b;
        shrunk.mu_min[trial % 4] += 0.1;
        CHECK(expected_volume(shrunk).log_volume <= base);

        auto shifted = b;
        double c = rng.uniform(-5.0, 5.0);
        for (size_t i = 0; i < 4; ++i) {
            shifted.mu_min[i] += c;
            shifted.mu_max[i] += c;
        }
        CHECK(std::abs(expected_volume(shifted).log_volume - base) < 1e-10);
    }
}

TEST_CASE("conditional_prob behaves like containment probability") {
    // Identical boxes: certainty in hard mode.
    GumbelBox a{{0.0, 0.0}, {1.0, 1.0}, 1e-3};
    CHECK(conditional_prob(a, a, MeetMode::Hard) == doctest::Approx(1.0));

    // Nested 1-D: [0,1] inside [0,2] conditions to one half.
    GumbelBox inner{{0.0}, {1.0}, 1e-3};
    GumbelBox outer{{0.0}, {2.0}, 1e-3};
    CHECK(conditional_prob(inner, outer, MeetMode::Hard) ==
          doctest::Approx(0.5).epsilon(0.01));

    // Disjoint: essentially zero.
    GumbelBox far{{10.0}, {11.0}, 1e-3};
    CHECK(conditional_prob(inner, far, MeetMode::Hard) <= 1e-6);

    // Pre-clamp diagnostic stays within a hair of [0,1] in hard mode.
    Rng rng(66);
    for (int trial = 0; trial < 100; ++trial) {
        auto x = random_box(rng, 3, 0.2);
        auto y = random_box(rng, 3, 0.2);
        double pre = -1.0;
        double p = conditional_prob(x, y, MeetMode::Hard, &pre);
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        CHECK(pre >= 0.0);
        CHECK(pre <= 1.0 + 1e-9);
    }
}

TEST_CASE("conditioning on a collapsed box is an error") {
    GumbelBox a{{0.0}, {1.0}, 1e-3};
    GumbelBox degenerate{{1000.0}, {-1000.0}, 1e-3};
    CHECK_THROWS_AS((void)conditional_prob(a, degenerate, MeetMode::Hard),
                    NumericError);
}

TEST_CASE("joint_prob3 is grouping-independent and respects hard limits") {
    GumbelBox a{{0.0, 0.0}, {1.0, 1.0}, 1e-3};
    CHECK(joint_prob3(a, a, a, MeetMode::Hard) ==
          doctest::Approx(std::exp(expected_volume(a).log_volume)));

    GumbelBox b{{5.0, 5.0}, {6.0, 6.0}, 1e-3};
    GumbelBox c{{-6.0, -6.0}, {-5.0, -5.0}, 1e-3};
    CHECK(joint_prob3(a, b, c, MeetMode::Hard) < 1e-12);

    Rng rng(67);
    for (int trial = 0; trial < 50; ++trial) {
        auto x = random_box(rng, 3, 0.4);
        auto y = random_box(rng, 3, 0.4);
        auto z = random_box(rng, 3, 0.4);
        for (auto mode : {MeetMode::Hard, MeetMode::Gumbel}) {
            double g1 = joint_prob3(x, y, z, mode);
            double g2 =
                std::exp(expected_volume(meet(x, meet(y, z, mode), mode)).log_volume);
            CHECK(g1 == doctest::Approx(g2).epsilon(1e-10));
        }
    }
}

TEST_CASE("dimension or beta mismatch is rejected") {
    GumbelBox a{{0.0}, {1.0}, 1.0};
    GumbelBox b{{0.0, 0.0}, {1.0, 1.0}, 1.0};
    CHECK_THROWS_AS((void)meet(a, b, MeetMode::Hard), NumericError);
    CHECK_THROWS_AS((void)join(a, b, MeetMode::Gumbel), NumericError);
    CHECK_THROWS_AS((void)conditional_prob(a, b, MeetMode::Hard), NumericError);
    GumbelBox c{{0.0}, {1.0}, 0.5};
    CHECK_THROWS_AS((void)meet(a, c, MeetMode::Hard), NumericError);
}

TEST_CASE("tape builders agree with the plain kernels and differentiate") {
    Rng rng(68);
    Param corners("corners", 8);  // two 2-d boxes, each [min min max max]
    for (int box = 0; box < 2; ++box) {
        for (int i = 0; i < 2; ++i) {
            double lo = rng.uniform(-1.0, 1.0);
            corners.value[4 * box + i] = lo;
            corners.value[4 * box + 2 + i] = lo + rng.uniform(0.3, 1.3);
        }
    }
    Param beta_p("beta", 1);
    beta_p.value = {0.3};

    auto eval = [&](MeetMode mode) {
        Tape t;
        TapeBox A{t.leaf(corners, 0, 2), t.leaf(corners, 2, 2)};
        TapeBox B{t.leaf(corners, 4, 2), t.leaf(corners, 6, 2)};
        auto beta = t.leaf(beta_p);
        auto m = tape_meet(t, A, B, beta, mode);
        return t.scalar(tape_log_volume(t, m, beta));
    };

    for (auto mode : {MeetMode::Hard, MeetMode::Gumbel}) {
        GumbelBox A{{corners.value[0], corners.value[1]},
                    {corners.value[2], corners.value[3]},
                    beta_p.value[0]};
        GumbelBox B{{corners.value[4], corners.value[5]},
                    {corners.value[6], corners.value[7]},
                    beta_p.value[0]};
        double plain = expected_volume(meet(A, B, mode)).log_volume;
        CHECK(eval(mode) == doctest::Approx(plain).epsilon(1e-9));
    }

    // Gradient of the gumbel-mode tape volume against central differences.
    Tape t;
    TapeBox A{t.leaf(corners, 0, 2), t.leaf(corners, 2, 2)};
    TapeBox B{t.leaf(corners, 4, 2), t.leaf(corners, 6, 2)};
    auto beta = t.leaf(beta_p);
    auto root = tape_log_volume(t, tape_meet(t, A, B, beta, MeetMode::Gumbel), beta);
    corners.zero_grad();
    beta_p.zero_grad();
    t.backward(root);

    const double h = 1e-6;
    for (size_t i = 0; i < corners.size(); ++i) {
        double keep = corners.value[i];
        corners.value[i] = keep + h;
        double up = eval(MeetMode::Gumbel);
        corners.value[i] = keep - h;
        double dn = eval(MeetMode::Gumbel);
        corners.value[i] = keep;
        double fd = (up - dn) / (2 * h);
        double denom = std::max({std::abs(fd), std::abs(corners.grad[i]), 1e-7});
        CHECK(std::abs(corners.grad[i] - fd) / denom < 1e-4);
    }
}
