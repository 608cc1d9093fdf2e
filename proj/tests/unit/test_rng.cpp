#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "ptbox/rng.hpp"

using namespace ptbox;

TEST_CASE("identical seeds give identical streams") {
    Rng a(1234), b(1234);
    for (int i = 0; i < 1000; ++i) {
        CHECK(a.next() == b.next());
    }
    Rng c(1234), d(4321);
    bool diverged = false;
    for (int i = 0; i < 10 && !diverged; ++i) diverged = c.next() != d.next();
    CHECK(diverged);
}

TEST_CASE("uniform lands in [0,1) and covers both halves") {
    Rng r(7);
    int low = 0, high = 0;
    for (int i = 0; i < 10000; ++i) {
        double u = r.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        (u < 0.5 ? low : high)++;
    }
    // Crude sanity: a fair split within 5 sigma.
    CHECK(std::abs(low - high) < 500);
}

TEST_CASE("uniform(lo,hi) respects bounds") {
    Rng r(99);
    for (int i = 0; i < 1000; ++i) {
        double u = r.uniform(-3.0, 2.0);
        CHECK(u >= -3.0);
        CHECK(u < 2.0);
    }
}

TEST_CASE("below(n) stays in range and hits every residue for small n") {
    Rng r(5);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        auto v = r.below(7);
        REQUIRE(v < 7);
        seen.insert(v);
    }
    CHECK(seen.size() == 7);
}

TEST_CASE("below(1) is always zero") {
    Rng r(13);
    for (int i = 0; i < 100; ++i) CHECK(r.below(1) == 0);
}

TEST_CASE("derive separates streams by tag and arguments") {
    auto base = Rng::derive(42, "init");
    CHECK(base == Rng::derive(42, "init"));
    CHECK(base != Rng::derive(43, "init"));
    CHECK(base != Rng::derive(42, "shuffle"));
    CHECK(Rng::derive(42, "neg", 0, 1) != Rng::derive(42, "neg", 1, 0));
    CHECK(Rng::derive(42, "neg", 3, 9) == Rng::derive(42, "neg", 3, 9));

    // Distinct epoch/position pairs should essentially never collide.
    std::set<std::uint64_t> seeds;
    for (std::uint64_t e = 0; e < 20; ++e)
        for (std::uint64_t p = 0; p < 50; ++p)
            seeds.insert(Rng::derive(42, "neg", e, p));
    CHECK(seeds.size() == 1000);
}
