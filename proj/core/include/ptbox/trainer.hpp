#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "ptbox/dataset.hpp"
#include "ptbox/model.hpp"

namespace ptbox {

struct EpochRow;

struct TrainConfig {
    double lr = 1e-4;
    int epochs = 100;
    int batch_size = 256;
    int neg_ratio = 5;  // negatives per positive, alternating tail/head
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 42;
    int eval_every = 1;        // validation cadence in epochs
    double clamp_eps = 1e-12;  // score clamp for the loss
    int workers = 1;
    double l2 = 0.0;            // decoupled weight decay; 0 disables
    bool resample = false;      // redraw one timestamp per interval per epoch
    std::size_t eval_sample = 0;  // cap validation queries (0 = all)
    std::filesystem::path out_dir;  // checkpoints and logs; empty writes nothing
    std::string sidecar_extra;  // appended to every checkpoint sidecar (the
                                // caller's resolved run config, typically)
    std::function<void(const EpochRow&)> on_epoch;  // progress hook, may be empty
};

struct AdamState {
    std::vector<std::vector<double>> m1, m2;  // per tensor, shaped like it
    std::int64_t step = 0;

    void init(const std::vector<Param*>& params);
};

// Bias-corrected Adam over every tensor, plus optional decoupled weight decay.
void adam_step(const std::vector<Param*>& params, AdamState& state, double lr,
               double beta1, double beta2, double eps, double weight_decay = 0.0);

struct BatchStats {
    double loss = 0.0;
    std::size_t clamp_events = 0;  // scores that hit the loss clamp
};

// One tape holding the whole batch: mean negative log-likelihood of positives
// scored true and sampled corruptions scored false,
//   L = -(1/N) [ sum_pos log s + sum_neg log(1 - s) ],  N = all terms.
// Negatives come from negative_sample, alternating tail/head corruption.
// Returns the loss node; caller runs backward.
Tape::NodeId batch_loss(Tape& t, std::span<const Quadruple> batch,
                        ModelParams& m, const TrainConfig& cfg, Rng& rng,
                        const Vocab& vocab, const SeenIndex& seen,
                        BatchStats* stats = nullptr);

struct EpochRow {
    int epoch = 0;
    double loss = 0.0;
    double val_mrr = 0.0;     // NaN on epochs without validation
    double val_hits10 = 0.0;  // likewise
    double wallclock_s = 0.0;
    // diagnostics
    double val_loss = 0.0;       // positives-only NLL on the validation split
    double best_val_loss = 0.0;  // running minimum of val_loss
    double inverted_frac = 0.0;
    std::size_t clamp_events = 0;
};

struct FitResult {
    ModelParams params;       // after the last epoch
    ModelParams best_params;  // highest validation MRR seen (last if never run)
    std::vector<EpochRow> log;
    double best_val_mrr = 0.0;
    double best_val_loss = 0.0;
    int best_epoch = 0;
};

// Shuffled mini-batch training with per-quadruple derived negative-sampling
// seeds, so results do not depend on the worker count for sampling and are
// bit-identical across runs at any fixed worker count. Writes train_log.csv,
// diagnostics.csv, best.ptbx, and last.ptbx under out_dir when set.
FitResult fit(const Dataset& ds, const ModelConfig& mcfg, const TrainConfig& cfg);

}  // namespace ptbox
