#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "ptbox/autodiff.hpp"

namespace ptbox {

inline constexpr double kEulerGamma = 0.5772156649015329;

enum class MeetMode { Hard, Gumbel };

// Axis-aligned box whose corners are Gumbel-distributed: mu_min holds the
// location parameters of the MaxGumbel min-corners, mu_max those of the
// MinGumbel max-corners, with one shared scale beta. Inverted coordinates
// (mu_min > mu_max) are legal and simply carry near-zero volume.
struct GumbelBox {
    std::vector<double> mu_min;
    std::vector<double> mu_max;
    double beta = 1.0;

    std::size_t dim() const { return mu_min.size(); }
};

struct VolumeResult {
    double log_volume = 0.0;
    std::vector<double> per_dim;  // filled only when requested
};

namespace boxkernel {

inline double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

inline double log_softplus(double x) {
    if (x < -33.0) return x;  // softplus(x) == e^x at double precision
    return std::log(softplus(x));
}

// beta * logsumexp(a/beta, b/beta): a smoothed maximum.
inline double smax(double a, double b, double beta) {
    const double m = a > b ? a : b;
    const double d = (a > b ? b - a : a - b) / beta;
    return m + beta * std::log1p(std::exp(d));
}

inline double smin(double a, double b, double beta) {
    const double m = a < b ? a : b;
    const double d = (a < b ? a - b : b - a) / beta;
    return m - beta * std::log1p(std::exp(d));
}

// log of the expected side length beta*softplus((mu_max-mu_min)/beta - 2*gamma)
inline double per_dim_log_factor(double mu_min, double mu_max, double beta) {
    return std::log(beta) +
           log_softplus((mu_max - mu_min) / beta - 2.0 * kEulerGamma);
}

inline double log_volume(std::span<const double> mu_min,
                         std::span<const double> mu_max, double beta) {
    double acc = 0.0;
    for (std::size_t i = 0; i < mu_min.size(); ++i)
        acc += per_dim_log_factor(mu_min[i], mu_max[i], beta);
    return acc;
}

}  // namespace boxkernel

GumbelBox meet(const GumbelBox& a, const GumbelBox& b, MeetMode mode);
GumbelBox join(const GumbelBox& a, const GumbelBox& b, MeetMode mode);

VolumeResult expected_volume(const GumbelBox& b, bool want_per_dim = false);

// exp(log Vol(a ∧ b) - log Vol(b)), clamped to [0, 1]. The unclamped ratio is
// written to *pre_clamp when given, for diagnostics. Throws NumericError when
// Vol(b) has underflowed past recovery (log-volume < -700).
double conditional_prob(const GumbelBox& a, const GumbelBox& b, MeetMode mode,
                        double* pre_clamp = nullptr);

// exp(log Vol(a ∧ b ∧ c)); not normalized.
double joint_prob3(const GumbelBox& a, const GumbelBox& b, const GumbelBox& c,
                   MeetMode mode);

// number of coordinates with mu_min > mu_max
std::size_t count_inverted(std::span<const double> mu_min,
                           std::span<const double> mu_max);
std::size_t count_inverted(const GumbelBox& b);

// --- tape-side builders -----------------------------------------------------
// A box under differentiation is a pair of corner nodes; beta is itself a node
// so a learned scale needs no special casing.

struct TapeBox {
    Tape::NodeId mu_min = -1;
    Tape::NodeId mu_max = -1;
};

TapeBox tape_meet(Tape& t, const TapeBox& a, const TapeBox& b,
                  Tape::NodeId beta, MeetMode mode);
TapeBox tape_join(Tape& t, const TapeBox& a, const TapeBox& b,
                  Tape::NodeId beta, MeetMode mode);
Tape::NodeId tape_log_volume(Tape& t, const TapeBox& b, Tape::NodeId beta);

}  // namespace ptbox
