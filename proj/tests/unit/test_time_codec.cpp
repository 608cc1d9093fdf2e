#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "ptbox/rng.hpp"
#include "ptbox/time_codec.hpp"

using namespace ptbox;

namespace {

// Independent oracle: the closed-form binomial expression. Fine for the
// small orders it is used at; the production path must agree with it.
double bernstein_direct(double x, int n, int k) {
    double binom = 1.0;
    for (int i = 0; i < k; ++i)
        binom = binom * static_cast<double>(n - i) / static_cast<double>(i + 1);
    return binom * std::pow(x, k) * std::pow(1.0 - x, n - k);
}

}  // namespace

TEST_CASE("normalize_time maps the span to [0,1] with clamping") {
    TimeSpan s{1900, 2000};
    CHECK(normalize_time(1900, s) == doctest::Approx(0.0));
    CHECK(normalize_time(2000, s) == doctest::Approx(1.0));
    CHECK(normalize_time(1950, s) == doctest::Approx(0.5));
    CHECK(normalize_time(1800, s) == 0.0);   // clamp below
    CHECK(normalize_time(2100, s) == 1.0);   // clamp above
    TimeSpan degenerate{1990, 1990};
    CHECK(normalize_time(1990, degenerate) == doctest::Approx(0.5));
    CHECK(normalize_time(2024, degenerate) == doctest::Approx(0.5));
}

TEST_CASE("warp keeps endpoints fixed and is monotone") {
    TimeCodec linear{.order_n = 4, .span = {0, 10}, .warp = TimeWarp::Linear};
    CHECK(warp_time(0.25, linear) == doctest::Approx(0.25));

    TimeCodec mlp{.order_n = 4,
                  .span = {0, 10},
                  .warp = TimeWarp::Mlp,
                  .warp_steepness = 4.0};
    CHECK(warp_time(0.0, mlp) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(warp_time(1.0, mlp) == doctest::Approx(1.0).epsilon(1e-12));
    double prev = -1.0;
    for (int i = 0; i <= 100; ++i) {
        double w = warp_time(i / 100.0, mlp);
        CHECK(w > prev);
        CHECK(w >= 0.0);
        CHECK(w <= 1.0);
        prev = w;
    }
    // Steeper warp compresses the edges harder.
    TimeCodec steep = mlp;
    steep.warp_steepness = 10.0;
    CHECK(warp_time(0.1, steep) < warp_time(0.1, mlp));
}

TEST_CASE("bernstein basis matches the direct binomial formula") {
    Rng rng(21);
    for (int n : {1, 2, 5, 12}) {
        std::vector<double> alpha(n + 1);
        for (int trial = 0; trial < 50; ++trial) {
            double x = rng.uniform();
            bernstein_basis(x, n, alpha);
            for (int k = 0; k <= n; ++k) {
                CHECK(alpha[k] ==
                      doctest::Approx(bernstein_direct(x, n, k)).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("bernstein basis sums to one and stays non-negative at high order") {
    Rng rng(33);
    for (int n : {2, 5, 20, 64}) {
        std::vector<double> alpha(n + 1);
        for (int trial = 0; trial < 200; ++trial) {
            double x = rng.uniform();
            bernstein_basis(x, n, alpha);
            double sum = std::accumulate(alpha.begin(), alpha.end(), 0.0);
            CHECK(std::abs(sum - 1.0) < 1e-12);
            for (double a : alpha) CHECK(a >= 0.0);
        }
    }
}

TEST_CASE("endpoints pick out the first and last basis function exactly") {
    for (int n : {1, 3, 20, 64}) {
        std::vector<double> alpha(n + 1);
        bernstein_basis(0.0, n, alpha);
        CHECK(alpha[0] == 1.0);
        for (int k = 1; k <= n; ++k) CHECK(alpha[k] == 0.0);
        bernstein_basis(1.0, n, alpha);
        CHECK(alpha[n] == 1.0);
        for (int k = 0; k < n; ++k) CHECK(alpha[k] == 0.0);
    }
}

TEST_CASE("time_coefficients is basis-at-warped-normalized-time") {
    TimeCodec codec{.order_n = 6, .span = {2000, 2020}, .warp = TimeWarp::Mlp,
                    .warp_steepness = 3.0};
    std::vector<double> got(codec.num_basis());
    time_coefficients(codec, 2015, got);
    std::vector<double> want(codec.num_basis());
    bernstein_basis(warp_time(normalize_time(2015, codec.span), codec),
                    codec.order_n, want);
    for (int k = 0; k < codec.num_basis(); ++k)
        CHECK(got[k] == doctest::Approx(want[k]).epsilon(1e-15));
}

TEST_CASE("time_embedding equals an explicit alpha^T X product") {
    TimeCodec codec{.order_n = 5, .span = {1990, 2010}};
    const int dim = 4;
    Rng rng(77);
    std::vector<double> X(static_cast<size_t>(codec.num_basis()) * dim);
    for (auto& v : X) v = rng.uniform(-1.0, 1.0);

    for (int tau : {1990, 1995, 2003, 2010, 1980, 2040}) {
        auto got = time_embedding(codec, X, dim, tau);
        std::vector<double> alpha(codec.num_basis());
        time_coefficients(codec, tau, alpha);
        for (int j = 0; j < dim; ++j) {
            double want = 0.0;
            for (int k = 0; k < codec.num_basis(); ++k)
                want += alpha[k] * X[static_cast<size_t>(k) * dim + j];
            CHECK(got[j] == doctest::Approx(want).epsilon(1e-13));
        }
    }
}

TEST_CASE("time vectors interpolate the basis rows at the endpoints") {
    TimeCodec codec{.order_n = 3, .span = {0, 100}};
    const int dim = 2;
    std::vector<double> X = {1, 2,  3, 4,  5, 6,  7, 8};
    auto at_min = time_embedding(codec, X, dim, 0);
    CHECK(at_min[0] == doctest::Approx(1.0));
    CHECK(at_min[1] == doctest::Approx(2.0));
    auto at_max = time_embedding(codec, X, dim, 100);
    CHECK(at_max[0] == doctest::Approx(7.0));
    CHECK(at_max[1] == doctest::Approx(8.0));
}
