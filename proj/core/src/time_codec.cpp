#include "ptbox/time_codec.hpp"

#include <cassert>
#include <cmath>

namespace ptbox {

double normalize_time(int tau, const TimeSpan& span) {
    if (span.min_year >= span.max_year) return 0.5;
    const double x = static_cast<double>(tau - span.min_year) /
                     static_cast<double>(span.max_year - span.min_year);
    if (x < 0.0) return 0.0;
    if (x > 1.0) return 1.0;
    return x;
}

double warp_time(double x, const TimeCodec& codec) {
    if (codec.warp == TimeWarp::Linear) return x;
    const double s = codec.warp_steepness;
    auto sig = [](double t) { return 1.0 / (1.0 + std::exp(-t)); };
    const double lo = sig(-0.5 * s);
    const double hi = sig(0.5 * s);
    return (sig(s * (x - 0.5)) - lo) / (hi - lo);
}

void bernstein_basis(double x, int n, std::span<double> out) {
    assert(n >= 1 && out.size() == static_cast<std::size_t>(n + 1));
    const double u = 1.0 - x;
    out[0] = 1.0;
    for (int j = 1; j <= n; ++j) {
        double carry = 0.0;
        for (int k = 0; k < j; ++k) {
            const double t = out[k];
            out[k] = u * t + carry;
            carry = x * t;
        }
        out[j] = carry;
    }
}

void time_coefficients(const TimeCodec& codec, int tau, std::span<double> out) {
    const double x = warp_time(normalize_time(tau, codec.span), codec);
    bernstein_basis(x, codec.order_n, out);
}

void time_embedding(const TimeCodec& codec, std::span<const double> basis_x,
                    int dim, int tau, std::span<double> out) {
    const int k = codec.num_basis();
    assert(basis_x.size() == static_cast<std::size_t>(k) * dim);
    assert(out.size() == static_cast<std::size_t>(dim));
    std::vector<double> alpha(static_cast<std::size_t>(k));
    time_coefficients(codec, tau, alpha);
    for (int j = 0; j < dim; ++j) out[j] = 0.0;
    for (int r = 0; r < k; ++r) {
        const double a = alpha[static_cast<std::size_t>(r)];
        if (a == 0.0) continue;
        const double* row = basis_x.data() + static_cast<std::size_t>(r) * dim;
        for (int j = 0; j < dim; ++j) out[static_cast<std::size_t>(j)] += a * row[j];
    }
}

std::vector<double> time_embedding(const TimeCodec& codec,
                                   std::span<const double> basis_x, int dim,
                                   int tau) {
    std::vector<double> out(static_cast<std::size_t>(dim));
    time_embedding(codec, basis_x, dim, tau, out);
    return out;
}

}  // namespace ptbox
