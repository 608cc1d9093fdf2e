#pragma once

#include <span>
#include <vector>

namespace ptbox {

struct TimeSpan {
    int min_year = 0;
    int max_year = 0;
};

enum class TimeWarp { Linear, Mlp };

// Maps a timestamp to the coefficient vector of a degree-n Bernstein basis.
// The learnable basis matrix X ((n+1) x d) lives in ModelParams; this type
// holds everything needed to turn a year into basis coefficients.
struct TimeCodec {
    int order_n = 20;  // K = order_n + 1 basis functions
    TimeSpan span;
    TimeWarp warp = TimeWarp::Linear;
    double warp_steepness = 4.0;  // only used when warp == Mlp

    int num_basis() const { return order_n + 1; }
};

// (tau - min) / (max - min), clamped to [0,1]; degenerate spans map to 0.5.
double normalize_time(int tau, const TimeSpan& span);

// Fixed sigmoid-shaped reparameterization of unit time, endpoints preserved.
double warp_time(double x, const TimeCodec& codec);

// All n+1 Bernstein basis values at x in [0,1], via the de Casteljau
// recurrence: convex combinations only, so no overflow or sign loss up to
// n = 64 and beyond. out.size() must be n+1.
void bernstein_basis(double x, int n, std::span<double> out);

// Coefficients for a year: normalize, warp, evaluate the basis.
void time_coefficients(const TimeCodec& codec, int tau, std::span<double> out);

// P_tau = alpha^T X for a row-major (n+1) x d basis matrix.
void time_embedding(const TimeCodec& codec, std::span<const double> basis_x,
                    int dim, int tau, std::span<double> out);

std::vector<double> time_embedding(const TimeCodec& codec,
                                   std::span<const double> basis_x, int dim,
                                   int tau);

}  // namespace ptbox
