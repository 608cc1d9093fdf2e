#include "ptbox/box.hpp"

#include <algorithm>
#include <cmath>

#include "ptbox/errors.hpp"

namespace ptbox {

namespace {

void require_compatible(const GumbelBox& a, const GumbelBox& b) {
    if (a.dim() != b.dim())
        throw NumericError("box dimension mismatch");
    if (a.beta != b.beta)
        throw NumericError("box beta mismatch");
}

}  // namespace

GumbelBox meet(const GumbelBox& a, const GumbelBox& b, MeetMode mode) {
    require_compatible(a, b);
    const std::size_t d = a.dim();
    GumbelBox out;
    out.beta = a.beta;
    out.mu_min.resize(d);
    out.mu_max.resize(d);
    if (mode == MeetMode::Hard) {
        for (std::size_t i = 0; i < d; ++i) {
            out.mu_min[i] = std::max(a.mu_min[i], b.mu_min[i]);
            out.mu_max[i] = std::min(a.mu_max[i], b.mu_max[i]);
        }
    } else {
        for (std::size_t i = 0; i < d; ++i) {
            out.mu_min[i] = boxkernel::smax(a.mu_min[i], b.mu_min[i], a.beta);
            out.mu_max[i] = boxkernel::smin(a.mu_max[i], b.mu_max[i], a.beta);
        }
    }
    return out;
}

GumbelBox join(const GumbelBox& a, const GumbelBox& b, MeetMode mode) {
    require_compatible(a, b);
    const std::size_t d = a.dim();
    GumbelBox out;
    out.beta = a.beta;
    out.mu_min.resize(d);
    out.mu_max.resize(d);
    if (mode == MeetMode::Hard) {
        for (std::size_t i = 0; i < d; ++i) {
            out.mu_min[i] = std::min(a.mu_min[i], b.mu_min[i]);
            out.mu_max[i] = std::max(a.mu_max[i], b.mu_max[i]);
        }
    } else {
        for (std::size_t i = 0; i < d; ++i) {
            out.mu_min[i] = boxkernel::smin(a.mu_min[i], b.mu_min[i], a.beta);
            out.mu_max[i] = boxkernel::smax(a.mu_max[i], b.mu_max[i], a.beta);
        }
    }
    return out;
}

VolumeResult expected_volume(const GumbelBox& b, bool want_per_dim) {
    VolumeResult r;
    const std::size_t d = b.dim();
    if (want_per_dim) r.per_dim.resize(d);
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double f =
            boxkernel::per_dim_log_factor(b.mu_min[i], b.mu_max[i], b.beta);
        if (want_per_dim) r.per_dim[i] = f;
        acc += f;
    }
    r.log_volume = acc;
    return r;
}

double conditional_prob(const GumbelBox& a, const GumbelBox& b, MeetMode mode,
                        double* pre_clamp) {
    const double log_den = expected_volume(b).log_volume;
    if (log_den < -700.0)
        throw NumericError("conditioning on near-empty box");
    const double log_num = expected_volume(meet(a, b, mode)).log_volume;
    const double raw = std::exp(log_num - log_den);
    if (pre_clamp) *pre_clamp = raw;
    return std::clamp(raw, 0.0, 1.0);
}

double joint_prob3(const GumbelBox& a, const GumbelBox& b, const GumbelBox& c,
                   MeetMode mode) {
    return std::exp(expected_volume(meet(meet(a, b, mode), c, mode)).log_volume);
}

std::size_t count_inverted(std::span<const double> mu_min,
                           std::span<const double> mu_max) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < mu_min.size(); ++i)
        if (mu_min[i] > mu_max[i]) ++n;
    return n;
}

std::size_t count_inverted(const GumbelBox& b) {
    return count_inverted(std::span<const double>(b.mu_min),
                          std::span<const double>(b.mu_max));
}

namespace {

// beta * logsumexp(a/beta, b/beta) built from tape primitives
Tape::NodeId tape_smax(Tape& t, Tape::NodeId a, Tape::NodeId b,
                       Tape::NodeId beta, Tape::NodeId inv_beta) {
    const auto lse = t.logsumexp2(t.scale_vs(a, inv_beta), t.scale_vs(b, inv_beta));
    return t.scale_vs(lse, beta);
}

Tape::NodeId tape_smin(Tape& t, Tape::NodeId a, Tape::NodeId b,
                       Tape::NodeId beta, Tape::NodeId inv_beta) {
    return t.neg(tape_smax(t, t.neg(a), t.neg(b), beta, inv_beta));
}

Tape::NodeId tape_min_ew(Tape& t, Tape::NodeId a, Tape::NodeId b) {
    return t.neg(t.max_ew(t.neg(a), t.neg(b)));
}

}  // namespace

TapeBox tape_meet(Tape& t, const TapeBox& a, const TapeBox& b,
                  Tape::NodeId beta, MeetMode mode) {
    if (mode == MeetMode::Hard) {
        return {t.max_ew(a.mu_min, b.mu_min), tape_min_ew(t, a.mu_max, b.mu_max)};
    }
    const auto inv_beta = t.inv(beta);
    return {tape_smax(t, a.mu_min, b.mu_min, beta, inv_beta),
            tape_smin(t, a.mu_max, b.mu_max, beta, inv_beta)};
}

TapeBox tape_join(Tape& t, const TapeBox& a, const TapeBox& b,
                  Tape::NodeId beta, MeetMode mode) {
    if (mode == MeetMode::Hard) {
        return {tape_min_ew(t, a.mu_min, b.mu_min), t.max_ew(a.mu_max, b.mu_max)};
    }
    const auto inv_beta = t.inv(beta);
    return {tape_smin(t, a.mu_min, b.mu_min, beta, inv_beta),
            tape_smax(t, a.mu_max, b.mu_max, beta, inv_beta)};
}

Tape::NodeId tape_log_volume(Tape& t, const TapeBox& b, Tape::NodeId beta) {
    const auto d = t.length(b.mu_min);
    const auto gap = t.sub(b.mu_max, b.mu_min);
    const auto z =
        t.add_const(t.scale_vs(gap, t.inv(beta)), -2.0 * kEulerGamma);
    const auto lsp_sum = t.sum(t.log_softplus(z));
    const auto d_log_beta =
        t.scale_const(t.log_ew(beta), static_cast<double>(d));
    return t.add(lsp_sum, d_log_beta);
}

}  // namespace ptbox
