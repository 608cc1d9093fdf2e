#include "ptbox/model.hpp"

#include <algorithm>
#include <cmath>

#include "ptbox/errors.hpp"

namespace ptbox {

namespace {

void require_dim(std::size_t a, std::size_t b) {
    if (a != b) throw NumericError("dimension mismatch");
}

// w = alpha^T X, unit-normalized unless configured off; the zero vector is
// left alone rather than divided by zero.
void fill_time_vector(const ModelParams& m, std::int32_t tau,
                      std::span<double> out) {
    time_embedding(m.codec, m.time_basis.value, m.config.dim, tau, out);
    if (!m.config.normalize_time_vec) return;
    double n2 = 0.0;
    for (double v : out) n2 += v * v;
    if (n2 == 0.0) return;
    const double inv = 1.0 / std::sqrt(n2);
    for (double& v : out) v *= inv;
}

void project_span(std::span<const double> c, std::span<const double> w,
                  std::span<double> out) {
    double dp = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) dp += w[j] * c[j];
    for (std::size_t j = 0; j < c.size(); ++j) out[j] = c[j] + w[j] * dp;
}

}  // namespace

std::vector<Param*> ModelParams::trainable() {
    std::vector<Param*> out{&entities, &relations, &time_basis};
    if (config.learn_beta) out.push_back(&beta_param);
    return out;
}

std::size_t ModelParams::trainable_count() const {
    const std::size_t d = static_cast<std::size_t>(config.dim);
    std::size_t n = (2 * static_cast<std::size_t>(num_entities) +
                     2 * static_cast<std::size_t>(num_relations) +
                     static_cast<std::size_t>(codec.num_basis())) *
                    d;
    if (config.learn_beta) n += 1;
    return n;
}

void ModelParams::zero_grads() {
    entities.zero_grad();
    relations.zero_grad();
    time_basis.zero_grad();
    beta_param.zero_grad();
}

ModelParams init_params(std::int32_t num_entities, std::int32_t num_relations,
                        TimeSpan span, const ModelConfig& config, Rng& rng) {
    ModelParams m;
    m.config = config;
    m.codec = TimeCodec{config.order_n, span, config.time_warp,
                        config.warp_steepness};
    m.num_entities = num_entities;
    m.num_relations = num_relations;

    const int d = config.dim;
    m.entities = Param("entities",
                       2 * static_cast<std::size_t>(num_entities) * d);
    for (std::int32_t i = 0; i < num_entities; ++i) {
        double* mn = m.entities.value.data() + m.entity_min_offset(i);
        double* mx = m.entities.value.data() + m.entity_max_offset(i);
        for (int j = 0; j < d; ++j) {
            const double center =
                rng.uniform(-config.init_center, config.init_center);
            const double half_width =
                rng.uniform(config.init_width_lo, config.init_width_hi);
            mn[j] = center - half_width;
            mx[j] = center + half_width;
        }
    }

    m.relations = Param("relations",
                        2 * static_cast<std::size_t>(num_relations) * d);
    for (std::int32_t r = 0; r < num_relations; ++r) {
        double* tr = m.relations.value.data() + m.rel_translation_offset(r);
        for (int j = 0; j < d; ++j)
            tr[j] = rng.uniform(-config.init_translation, config.init_translation);
        // log_scale stays zero: identity scaling at initialization
    }

    m.time_basis =
        Param("time_basis", static_cast<std::size_t>(m.codec.num_basis()) * d);
    for (double& v : m.time_basis.value)
        v = rng.uniform(-config.init_time, config.init_time);

    m.beta_param = Param("beta", 1);
    m.beta_param.value[0] = config.beta;
    return m;
}

ModelParams init_params(const Vocab& vocab, const ModelConfig& config, Rng& rng) {
    return init_params(vocab.num_entities(), vocab.num_relations(), vocab.span(),
                       config, rng);
}

GumbelBox entity_box(const ModelParams& m, std::int32_t id) {
    GumbelBox b;
    b.beta = m.beta_value();
    const auto mn = m.entity_min(id);
    const auto mx = m.entity_max(id);
    b.mu_min.assign(mn.begin(), mn.end());
    b.mu_max.assign(mx.begin(), mx.end());
    return b;
}

RelationVecs relation_vecs(const ModelParams& m, std::int32_t r) {
    RelationVecs v;
    const auto tr = m.rel_translation(r);
    const auto ls = m.rel_log_scale(r);
    v.translation.assign(tr.begin(), tr.end());
    v.log_scale.assign(ls.begin(), ls.end());
    return v;
}

std::vector<double> time_vector(const ModelParams& m, std::int32_t tau) {
    std::vector<double> w(static_cast<std::size_t>(m.config.dim));
    fill_time_vector(m, tau, w);
    return w;
}

GumbelBox temporal_project_box(const GumbelBox& b, std::span<const double> w) {
    require_dim(b.dim(), w.size());
    GumbelBox out;
    out.beta = b.beta;
    out.mu_min.resize(b.dim());
    out.mu_max.resize(b.dim());
    project_span(b.mu_min, w, out.mu_min);
    project_span(b.mu_max, w, out.mu_max);
    return out;
}

RelationVecs temporal_project_vec(const RelationVecs& r,
                                  std::span<const double> w) {
    require_dim(r.translation.size(), w.size());
    RelationVecs out;
    out.translation.resize(w.size());
    out.log_scale.resize(w.size());
    project_span(r.translation, w, out.translation);
    project_span(r.log_scale, w, out.log_scale);
    return out;
}

GumbelBox relation_transform(const GumbelBox& b, const RelationVecs& r) {
    require_dim(b.dim(), r.translation.size());
    GumbelBox out;
    out.beta = b.beta;
    out.mu_min.resize(b.dim());
    out.mu_max.resize(b.dim());
    for (std::size_t j = 0; j < b.dim(); ++j) {
        const double s = std::exp(r.log_scale[j]);
        out.mu_min[j] = (b.mu_min[j] + r.translation[j]) * s;
        out.mu_max[j] = (b.mu_max[j] + r.translation[j]) * s;
    }
    return out;
}

double log_score(const ModelParams& m, const Quadruple& q) {
    Scorer s(m);
    return s.log_score(q);
}

double score(const ModelParams& m, const Quadruple& q) {
    return std::clamp(std::exp(log_score(m, q)), 0.0, 1.0);
}

double inverted_fraction(const ModelParams& m) {
    std::size_t inverted = 0;
    for (std::int32_t i = 0; i < m.num_entities; ++i)
        inverted += count_inverted(m.entity_min(i), m.entity_max(i));
    const std::size_t total =
        static_cast<std::size_t>(m.num_entities) * m.config.dim;
    return total == 0 ? 0.0 : static_cast<double>(inverted) / total;
}

Tape::NodeId build_log_score(Tape& t, ModelParams& m, const Quadruple& q) {
    const int d = m.config.dim;
    const int k = m.codec.num_basis();

    std::vector<double> alpha(static_cast<std::size_t>(k));
    time_coefficients(m.codec, q.tau, alpha);

    const auto x = t.leaf(m.time_basis);
    const auto p = t.basis_combine(x, alpha, d);
    Tape::NodeId w = p;
    if (m.config.normalize_time_vec) {
        const auto n2 = t.dot(p, p);
        if (t.scalar(n2) > 0.0)
            w = t.scale_vs(p, t.inv(t.sqrt_ew(n2)));
    }

    const auto beta = m.config.learn_beta ? t.leaf(m.beta_param)
                                          : t.constant(m.config.beta);

    const auto project = [&](Tape::NodeId c) {
        return t.add(c, t.scale_vs(w, t.dot(w, c)));
    };

    const bool evolve_entities =
        m.config.evolution_target != EvolutionTarget::Relation;
    const bool evolve_relation =
        m.config.evolution_target != EvolutionTarget::Entity;

    auto hmin = t.leaf(m.entities, m.entity_min_offset(q.h), d);
    auto hmax = t.leaf(m.entities, m.entity_max_offset(q.h), d);
    auto tmin = t.leaf(m.entities, m.entity_min_offset(q.t), d);
    auto tmax = t.leaf(m.entities, m.entity_max_offset(q.t), d);
    if (evolve_entities) {
        hmin = project(hmin);
        hmax = project(hmax);
        tmin = project(tmin);
        tmax = project(tmax);
    }

    auto tr = t.leaf(m.relations, m.rel_translation_offset(q.r), d);
    auto ls = t.leaf(m.relations, m.rel_log_scale_offset(q.r), d);
    if (evolve_relation) {
        tr = project(tr);
        ls = project(ls);
    }
    const auto scale = t.exp_ew(ls);
    const auto transform = [&](Tape::NodeId c) {
        return t.mul(t.add(c, tr), scale);
    };

    const TapeBox a{transform(hmin), transform(hmax)};
    const TapeBox b = m.config.score_mode == ScoreMode::Paper
                          ? TapeBox{transform(tmin), transform(tmax)}
                          : TapeBox{tmin, tmax};

    const auto log_den = tape_log_volume(t, b, beta);
    if (t.scalar(log_den) < -700.0)
        throw NumericError("conditioning on near-empty box");
    const auto log_num =
        tape_log_volume(t, tape_meet(t, a, b, beta, m.config.meet_mode), beta);
    return t.sub(log_num, log_den);
}

Scorer::Scorer(const ModelParams& m)
    : m_(m),
      d_(m.config.dim),
      alpha_(static_cast<std::size_t>(m.codec.num_basis())),
      w_(static_cast<std::size_t>(d_)),
      tr_(static_cast<std::size_t>(d_)),
      scale_(static_cast<std::size_t>(d_)),
      fixed_min_(static_cast<std::size_t>(d_)),
      fixed_max_(static_cast<std::size_t>(d_)),
      cand_min_(static_cast<std::size_t>(d_)),
      cand_max_(static_cast<std::size_t>(d_)),
      tmp_min_(static_cast<std::size_t>(d_)),
      tmp_max_(static_cast<std::size_t>(d_)) {}

void Scorer::compute_w(std::int32_t tau) {
    fill_time_vector(m_, tau, w_);
}

void Scorer::project(const double* c, double* out) const {
    double dp = 0.0;
    for (int j = 0; j < d_; ++j) dp += w_[j] * c[j];
    for (int j = 0; j < d_; ++j) out[j] = c[j] + w_[j] * dp;
}

double Scorer::evolved_relation(std::int32_t r) {
    const auto tr = m_.rel_translation(r);
    const auto ls = m_.rel_log_scale(r);
    if (m_.config.evolution_target != EvolutionTarget::Entity) {
        project(tr.data(), tr_.data());
        project(ls.data(), tmp_min_.data());
        for (int j = 0; j < d_; ++j) scale_[j] = std::exp(tmp_min_[j]);
    } else {
        std::copy(tr.begin(), tr.end(), tr_.begin());
        for (int j = 0; j < d_; ++j) scale_[j] = std::exp(ls[j]);
    }
    return 0.0;
}

double Scorer::pair_log_score(const double* hmin, const double* hmax,
                              const double* tmin, const double* tmax) const {
    const double beta = m_.beta_value();
    const bool hard = m_.config.meet_mode == MeetMode::Hard;
    double num = 0.0;
    for (int j = 0; j < d_; ++j) {
        const double mn = hard ? std::max(hmin[j], tmin[j])
                               : boxkernel::smax(hmin[j], tmin[j], beta);
        const double mx = hard ? std::min(hmax[j], tmax[j])
                               : boxkernel::smin(hmax[j], tmax[j], beta);
        num += boxkernel::per_dim_log_factor(mn, mx, beta);
    }
    return num;
}

void Scorer::begin_query(std::int32_t r, std::int32_t tau, CorruptSlot swept,
                         std::int32_t fixed_entity) {
    if (!query_active_ || tau != query_tau_) {
        compute_w(tau);
        query_tau_ = tau;
    }
    evolved_relation(r);
    swept_ = swept;
    query_active_ = true;

    const bool evolve_entities =
        m_.config.evolution_target != EvolutionTarget::Relation;
    const auto emin = m_.entity_min(fixed_entity);
    const auto emax = m_.entity_max(fixed_entity);
    const double* mn = emin.data();
    const double* mx = emax.data();
    if (evolve_entities) {
        project(mn, tmp_min_.data());
        project(mx, tmp_max_.data());
        mn = tmp_min_.data();
        mx = tmp_max_.data();
    }

    // the fixed side is the head when sweeping tails and vice versa; the head
    // is always transformed, the tail only in paper mode
    const bool transform_fixed =
        swept == CorruptSlot::Tail || m_.config.score_mode == ScoreMode::Paper;
    if (transform_fixed) {
        for (int j = 0; j < d_; ++j) {
            fixed_min_[j] = (mn[j] + tr_[j]) * scale_[j];
            fixed_max_[j] = (mx[j] + tr_[j]) * scale_[j];
        }
    } else {
        std::copy(mn, mn + d_, fixed_min_.begin());
        std::copy(mx, mx + d_, fixed_max_.begin());
    }

    if (swept == CorruptSlot::Head) {
        // denominator is the fixed tail box: check it once per query
        const double beta = m_.beta_value();
        fixed_log_vol_ = boxkernel::log_volume(fixed_min_, fixed_max_, beta);
        if (fixed_log_vol_ < -700.0)
            throw NumericError("conditioning on near-empty box");
    }
}

double Scorer::swept_log_score(std::int32_t candidate) {
    const bool evolve_entities =
        m_.config.evolution_target != EvolutionTarget::Relation;
    const auto emin = m_.entity_min(candidate);
    const auto emax = m_.entity_max(candidate);
    const double* mn = emin.data();
    const double* mx = emax.data();
    if (evolve_entities) {
        project(mn, cand_min_.data());
        project(mx, cand_max_.data());
        mn = cand_min_.data();
        mx = cand_max_.data();
    }

    const double beta = m_.beta_value();
    if (swept_ == CorruptSlot::Tail) {
        // candidate is the tail: it is the denominator box
        const double* bmin = mn;
        const double* bmax = mx;
        if (m_.config.score_mode == ScoreMode::Paper) {
            for (int j = 0; j < d_; ++j) {
                tmp_min_[j] = (mn[j] + tr_[j]) * scale_[j];
                tmp_max_[j] = (mx[j] + tr_[j]) * scale_[j];
            }
            bmin = tmp_min_.data();
            bmax = tmp_max_.data();
        }
        const double log_den = boxkernel::log_volume(
            std::span<const double>(bmin, static_cast<std::size_t>(d_)),
            std::span<const double>(bmax, static_cast<std::size_t>(d_)), beta);
        if (log_den < -700.0)
            throw NumericError("conditioning on near-empty box");
        const double log_num =
            pair_log_score(fixed_min_.data(), fixed_max_.data(), bmin, bmax);
        return log_num - log_den;
    }

    // candidate is the head: always transformed, denominator fixed
    for (int j = 0; j < d_; ++j) {
        tmp_min_[j] = (mn[j] + tr_[j]) * scale_[j];
        tmp_max_[j] = (mx[j] + tr_[j]) * scale_[j];
    }
    const double log_num = pair_log_score(tmp_min_.data(), tmp_max_.data(),
                                          fixed_min_.data(), fixed_max_.data());
    return log_num - fixed_log_vol_;
}

double Scorer::log_score(const Quadruple& q) {
    begin_query(q.r, q.tau, CorruptSlot::Tail, q.h);
    return swept_log_score(q.t);
}

double Scorer::score(const Quadruple& q) {
    return std::clamp(std::exp(log_score(q)), 0.0, 1.0);
}

}  // namespace ptbox
