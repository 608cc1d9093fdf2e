#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ptbox/autodiff.hpp"
#include "ptbox/box.hpp"
#include "ptbox/dataset.hpp"
#include "ptbox/rng.hpp"
#include "ptbox/time_codec.hpp"

namespace ptbox {

// Paper mode conditions the transformed head box on the transformed tail box
// (the volume ratio as published, which makes relation translation inert);
// head mode transforms only the head and conditions on the bare tail.
enum class ScoreMode { Paper, Head };

// Which side of the model the time projection acts on.
enum class EvolutionTarget { Entity, Relation, Both };

struct ModelConfig {
    int dim = 128;
    int order_n = 20;
    double beta = 1.0;
    bool learn_beta = false;
    ScoreMode score_mode = ScoreMode::Paper;
    MeetMode meet_mode = MeetMode::Gumbel;
    EvolutionTarget evolution_target = EvolutionTarget::Relation;
    TimeWarp time_warp = TimeWarp::Linear;
    double warp_steepness = 4.0;
    bool normalize_time_vec = true;  // unit-normalize w before projecting

    // initialization ranges; all draws are symmetric around zero except width
    double init_center = 0.1;       // box center ~ U(-c, c)
    double init_width_lo = 0.001;   // half-width ~ U(lo, hi)
    double init_width_hi = 0.1;
    double init_translation = 0.01; // relation translation ~ U(-t, t)
    double init_time = 0.1;         // basis matrix X ~ U(-x, x)
};

// All trainable tensors. Layouts (row-major, doubles):
//   entities:   per entity, d min-corner locations then d max-corner locations
//   relations:  per relation, d translation entries then d log-scale entries
//   time_basis: (order_n + 1) x d matrix X
//   beta_param: length 1, consulted only when learn_beta
struct ModelParams {
    ModelConfig config;
    TimeCodec codec;
    std::int32_t num_entities = 0;
    std::int32_t num_relations = 0;

    Param entities;
    Param relations;
    Param time_basis;
    Param beta_param;

    int dim() const { return config.dim; }
    double beta_value() const {
        return config.learn_beta ? beta_param.value[0] : config.beta;
    }

    std::size_t entity_min_offset(std::int32_t i) const {
        return static_cast<std::size_t>(2 * i) * config.dim;
    }
    std::size_t entity_max_offset(std::int32_t i) const {
        return entity_min_offset(i) + config.dim;
    }
    std::size_t rel_translation_offset(std::int32_t r) const {
        return static_cast<std::size_t>(2 * r) * config.dim;
    }
    std::size_t rel_log_scale_offset(std::int32_t r) const {
        return rel_translation_offset(r) + config.dim;
    }

    std::span<const double> entity_min(std::int32_t i) const {
        return {entities.value.data() + entity_min_offset(i),
                static_cast<std::size_t>(config.dim)};
    }
    std::span<const double> entity_max(std::int32_t i) const {
        return {entities.value.data() + entity_max_offset(i),
                static_cast<std::size_t>(config.dim)};
    }
    std::span<const double> rel_translation(std::int32_t r) const {
        return {relations.value.data() + rel_translation_offset(r),
                static_cast<std::size_t>(config.dim)};
    }
    std::span<const double> rel_log_scale(std::int32_t r) const {
        return {relations.value.data() + rel_log_scale_offset(r),
                static_cast<std::size_t>(config.dim)};
    }

    std::vector<Param*> trainable();
    std::size_t trainable_count() const;  // (2|E| + 2|R| + K)·d, +1 learned beta
    void zero_grads();
};

ModelParams init_params(const Vocab& vocab, const ModelConfig& config, Rng& rng);

// config + span given directly (synthetic setups without a Vocab)
ModelParams init_params(std::int32_t num_entities, std::int32_t num_relations,
                        TimeSpan span, const ModelConfig& config, Rng& rng);

// --- plain-value pipeline (evaluation, probes, tests) -----------------------

struct RelationVecs {
    std::vector<double> translation;
    std::vector<double> log_scale;
};

GumbelBox entity_box(const ModelParams& m, std::int32_t id);
RelationVecs relation_vecs(const ModelParams& m, std::int32_t r);

// unit-normalized (per config) time embedding w(tau); zero stays zero
std::vector<double> time_vector(const ModelParams& m, std::int32_t tau);

// c -> c + (w^T c) w, each corner independently
GumbelBox temporal_project_box(const GumbelBox& b, std::span<const double> w);
RelationVecs temporal_project_vec(const RelationVecs& r, std::span<const double> w);

// c -> (c + translation) * exp(log_scale), both corners
GumbelBox relation_transform(const GumbelBox& b, const RelationVecs& r);

// log of the scoring ratio log Vol(A ∧ B) - log Vol(B); throws NumericError
// when the denominator box is numerically empty (log-volume < -700)
double log_score(const ModelParams& m, const Quadruple& q);

// exp(log_score) clamped into [0, 1]
double score(const ModelParams& m, const Quadruple& q);

// fraction of (entity, dimension) pairs with mu_min > mu_max
double inverted_fraction(const ModelParams& m);

// --- tape path (training) ----------------------------------------------------

// Records the full scoring computation for one quadruple and returns the
// unclamped log-score node. Callers clamp for loss purposes.
Tape::NodeId build_log_score(Tape& t, ModelParams& m, const Quadruple& q);

// --- fast repeated scoring ----------------------------------------------------

// Allocation-free after construction; one instance per thread. begin_query
// fixes relation, timestamp, and the non-swept entity, after which candidates
// on the swept side are scored with the per-query work hoisted out.
class Scorer {
  public:
    explicit Scorer(const ModelParams& m);

    double log_score(const Quadruple& q);
    double score(const Quadruple& q);

    void begin_query(std::int32_t r, std::int32_t tau, CorruptSlot swept,
                     std::int32_t fixed_entity);
    double swept_log_score(std::int32_t candidate);

  private:
    void compute_w(std::int32_t tau);
    void project(const double* c, double* out) const;
    double evolved_relation(std::int32_t r);  // fills tr_/scale_; returns nothing useful
    double pair_log_score(const double* hmin, const double* hmax,
                          const double* tmin, const double* tmax) const;

    const ModelParams& m_;
    int d_;
    std::vector<double> alpha_;          // basis coefficients
    std::vector<double> w_;              // projected time vector
    std::vector<double> tr_, scale_;     // evolved relation: translation, exp(log_scale)
    std::vector<double> fixed_min_, fixed_max_;  // transformed fixed-side box
    std::vector<double> cand_min_, cand_max_;    // scratch for the swept side
    std::vector<double> tmp_min_, tmp_max_;
    CorruptSlot swept_ = CorruptSlot::Tail;
    double fixed_log_vol_ = 0.0;  // head queries: denominator is the fixed side
    std::int32_t query_tau_ = 0;
    bool query_active_ = false;
};

}  // namespace ptbox
