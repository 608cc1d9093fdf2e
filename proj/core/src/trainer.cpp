#include "ptbox/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "ptbox/checkpoint.hpp"
#include "ptbox/errors.hpp"
#include "ptbox/evaluator.hpp"
#include "ptbox/parallel.hpp"

namespace ptbox {

void AdamState::init(const std::vector<Param*>& params) {
    m1.clear();
    m2.clear();
    for (const Param* p : params) {
        m1.emplace_back(p->size(), 0.0);
        m2.emplace_back(p->size(), 0.0);
    }
    step = 0;
}

void adam_step(const std::vector<Param*>& params, AdamState& state, double lr,
               double beta1, double beta2, double eps, double weight_decay) {
    if (state.m1.size() != params.size()) state.init(params);
    ++state.step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (std::size_t t = 0; t < params.size(); ++t) {
        Param& p = *params[t];
        auto& m = state.m1[t];
        auto& v = state.m2[t];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double g = p.grad[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p.value[i] -= lr * (mhat / (std::sqrt(vhat) + eps) +
                                weight_decay * p.value[i]);
        }
    }
}

namespace {

// log s clamped for the loss plus this quadruple's negatives:
//   log s_pos + sum_j log(1 - s_neg_j), negatives alternating tail/head.
Tape::NodeId quad_terms(Tape& t, ModelParams& m, const Quadruple& q,
                        int neg_ratio, Rng& nrng, const Vocab& vocab,
                        const SeenIndex& seen, double lo, double hi,
                        std::size_t& clamp_events) {
    Tape::NodeId ls = build_log_score(t, m, q);
    const double v = t.scalar(ls);
    if (v < lo || v > hi) ++clamp_events;
    Tape::NodeId acc = t.clamp(ls, lo, hi);
    for (int j = 0; j < neg_ratio; ++j) {
        const CorruptSlot slot =
            j % 2 == 0 ? CorruptSlot::Tail : CorruptSlot::Head;
        const Quadruple neg = negative_sample(q, vocab, slot, nrng, seen);
        Tape::NodeId nls = build_log_score(t, m, neg);
        const double nv = t.scalar(nls);
        if (nv < lo || nv > hi) ++clamp_events;
        acc = t.add(acc, t.log1mexp(t.clamp(nls, lo, hi)));
    }
    return acc;
}

void check_config(const TrainConfig& cfg) {
    if (cfg.lr < 0.0) throw ConfigError("lr must be >= 0");
    if (cfg.epochs < 0) throw ConfigError("epochs must be >= 0");
    if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (cfg.neg_ratio < 0) throw ConfigError("neg_ratio must be >= 0");
    if (cfg.eval_every < 1) throw ConfigError("eval_every must be >= 1");
    if (cfg.workers < 1) throw ConfigError("workers must be >= 1");
    if (!(cfg.clamp_eps > 0.0) || cfg.clamp_eps >= 0.5)
        throw ConfigError("clamp_eps must lie in (0, 0.5)");
    if (!(cfg.adam_beta1 >= 0.0 && cfg.adam_beta1 < 1.0) ||
        !(cfg.adam_beta2 >= 0.0 && cfg.adam_beta2 < 1.0))
        throw ConfigError("adam betas must lie in [0, 1)");
}

// Per-worker gradient storage. Relations, time basis, and beta are merged
// densely (they are small); entity blocks are merged via the touched-id list
// so the big tensor is never swept.
struct WorkerGrads {
    std::vector<double> entities, relations, time_basis, beta;
    std::vector<std::int32_t> touched;
    double term_sum = 0.0;
    std::size_t clamp_events = 0;

    void size_to(const ModelParams& m) {
        entities.assign(m.entities.size(), 0.0);
        relations.assign(m.relations.size(), 0.0);
        time_basis.assign(m.time_basis.size(), 0.0);
        beta.assign(m.beta_param.size(), 0.0);
    }
};

double nan_value() { return std::numeric_limits<double>::quiet_NaN(); }

std::string csv_num(double v, const char* fmt = "%.17g") {
    if (std::isnan(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

// Positives-only mean clamped NLL; numerically dead queries count at the clamp
// floor instead of aborting the epoch.
double validation_loss(const ModelParams& m, const std::vector<Quadruple>& split,
                       double clamp_eps, int workers) {
    if (split.empty()) return nan_value();
    const double lo = std::log(clamp_eps);
    const double hi = std::log1p(-clamp_eps);
    std::vector<double> partial(static_cast<std::size_t>(std::max(1, workers)), 0.0);
    parallel_chunks(split.size(), workers, [&](int wid, std::size_t b, std::size_t e) {
        Scorer scorer(m);
        double acc = 0.0;
        for (std::size_t i = b; i < e; ++i) {
            double ls;
            try {
                ls = scorer.log_score(split[i]);
            } catch (const NumericError&) {
                ls = lo;
            }
            acc -= std::clamp(ls, lo, hi);
        }
        partial[static_cast<std::size_t>(wid)] = acc;
    });
    double sum = 0.0;
    for (double p : partial) sum += p;
    return sum / static_cast<double>(split.size());
}

}  // namespace

Tape::NodeId batch_loss(Tape& t, std::span<const Quadruple> batch,
                        ModelParams& m, const TrainConfig& cfg, Rng& rng,
                        const Vocab& vocab, const SeenIndex& seen,
                        BatchStats* stats) {
    if (batch.empty()) throw ConfigError("batch_loss over an empty batch");
    if (cfg.neg_ratio < 0) throw ConfigError("neg_ratio must be >= 0");
    const double lo = std::log(cfg.clamp_eps);
    const double hi = std::log1p(-cfg.clamp_eps);
    std::size_t clamp_events = 0;
    Tape::NodeId acc = -1;
    for (const Quadruple& q : batch) {
        Tape::NodeId terms = quad_terms(t, m, q, cfg.neg_ratio, rng, vocab, seen,
                                        lo, hi, clamp_events);
        acc = acc < 0 ? terms : t.add(acc, terms);
    }
    const double n = static_cast<double>(batch.size()) *
                     static_cast<double>(1 + cfg.neg_ratio);
    Tape::NodeId loss = t.scale_const(acc, -1.0 / n);
    if (stats) {
        stats->loss = t.scalar(loss);
        stats->clamp_events = clamp_events;
    }
    return loss;
}

FitResult fit(const Dataset& ds, const ModelConfig& mcfg, const TrainConfig& cfg) {
    check_config(cfg);
    if (ds.train.empty()) throw DataError("training split is empty");

    Rng init_rng(Rng::derive(cfg.seed, "init"));
    ModelParams params = init_params(ds.vocab, mcfg, init_rng);
    std::vector<Param*> tensors = params.trainable();
    AdamState adam;
    adam.init(tensors);

    const int W = cfg.workers;
    std::vector<WorkerGrads> grads;
    if (W > 1) {
        grads.resize(static_cast<std::size_t>(W));
        for (auto& g : grads) g.size_to(params);
    }

    std::ofstream log_csv, diag_csv;
    if (!cfg.out_dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(cfg.out_dir, ec);
        if (ec)
            throw DataError("cannot create output directory " +
                            cfg.out_dir.string() + ": " + ec.message());
        log_csv.open(cfg.out_dir / "train_log.csv", std::ios::trunc);
        diag_csv.open(cfg.out_dir / "diagnostics.csv", std::ios::trunc);
        if (!log_csv || !diag_csv)
            throw DataError("cannot write logs under " + cfg.out_dir.string());
        log_csv << "epoch, loss, val_mrr, val_hits10, wallclock_s\n";
        diag_csv << "epoch, val_loss, best_val_loss, inverted_frac, clamp_events\n";
    }

    CheckpointMeta meta;
    meta.entities_hash = ds.vocab.entities_hash();
    meta.relations_hash = ds.vocab.relations_hash();
    meta.num_entities = static_cast<std::uint32_t>(ds.vocab.num_entities());
    meta.num_relations = static_cast<std::uint32_t>(ds.vocab.num_relations());

    FitResult res;
    double best_mrr = -1.0;
    double best_loss = nan_value();
    int best_epoch = 0;
    ModelParams best = params;

    const double lo = std::log(cfg.clamp_eps);
    const double hi = std::log1p(-cfg.clamp_eps);
    const auto t0 = std::chrono::steady_clock::now();

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const std::vector<Quadruple>* train = &ds.train;
        std::vector<Quadruple> resampled;
        if (cfg.resample && !ds.train_intervals.empty()) {
            Rng rrng(Rng::derive(cfg.seed, "resample",
                                 static_cast<std::uint64_t>(epoch)));
            resampled.reserve(ds.train_intervals.size());
            for (const IntervalFact& f : ds.train_intervals) {
                const auto width = static_cast<std::uint64_t>(f.hi - f.lo) + 1;
                const auto tau = f.lo + static_cast<std::int32_t>(rrng.below(width));
                resampled.push_back(Quadruple{f.h, f.r, f.t, tau});
            }
            train = &resampled;
        }

        const std::size_t n = train->size();
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng(Rng::derive(cfg.seed, "shuffle",
                                    static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = n; i-- > 1;)
            std::swap(order[i], order[shuffle_rng.below(i + 1)]);

        double epoch_term_sum = 0.0;
        std::size_t epoch_clamps = 0;

        for (std::size_t bs = 0; bs < n; bs += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t be = std::min(n, bs + static_cast<std::size_t>(cfg.batch_size));
            const double batch_terms =
                static_cast<double>(be - bs) * static_cast<double>(1 + cfg.neg_ratio);
            params.zero_grads();

            double solo_term_sum = 0.0;  // single-worker accumulators
            std::size_t solo_clamps = 0;
            try {
                parallel_chunks(be - bs, W, [&](int wid, std::size_t clo, std::size_t chi) {
                    Tape tape;
                    WorkerGrads* wg = W > 1 ? &grads[static_cast<std::size_t>(wid)] : nullptr;
                    Tape::GradSinks sinks;
                    if (wg) {
                        sinks.entries = {
                            {&params.entities, wg->entities.data()},
                            {&params.relations, wg->relations.data()},
                            {&params.time_basis, wg->time_basis.data()},
                            {&params.beta_param, wg->beta.data()},
                        };
                    }
                    double term_sum = 0.0;
                    std::size_t clamps = 0;
                    for (std::size_t k = clo; k < chi; ++k) {
                        const std::size_t pos = bs + k;  // position in the epoch
                        const Quadruple& q = (*train)[order[pos]];
                        Rng nrng(Rng::derive(cfg.seed, "neg",
                                             static_cast<std::uint64_t>(epoch),
                                             static_cast<std::uint64_t>(pos)));
                        tape.clear();
                        if (wg) {
                            // negatives touch at most one new entity each
                            wg->touched.push_back(q.h);
                            wg->touched.push_back(q.t);
                        }
                        if (wg) {
                            // replay sampling first so touched ids are known;
                            // the same derived stream drives the real pass
                            Rng peek(Rng::derive(cfg.seed, "neg",
                                                 static_cast<std::uint64_t>(epoch),
                                                 static_cast<std::uint64_t>(pos)));
                            for (int j = 0; j < cfg.neg_ratio; ++j) {
                                const CorruptSlot slot = j % 2 == 0
                                                             ? CorruptSlot::Tail
                                                             : CorruptSlot::Head;
                                const Quadruple neg =
                                    negative_sample(q, ds.vocab, slot, peek, ds.seen);
                                wg->touched.push_back(
                                    slot == CorruptSlot::Tail ? neg.t : neg.h);
                            }
                        }
                        const Tape::NodeId term =
                            quad_terms(tape, params, q, cfg.neg_ratio, nrng,
                                       ds.vocab, ds.seen, lo, hi, clamps);
                        tape.backward(term, -1.0 / batch_terms, wg ? &sinks : nullptr);
                        term_sum += tape.scalar(term);
                    }
                    if (wg) {
                        wg->term_sum = term_sum;
                        wg->clamp_events = clamps;
                    } else {
                        solo_term_sum = term_sum;
                        solo_clamps = clamps;
                    }
                });
            } catch (const NumericError& e) {
                throw NumericError(
                    "epoch " + std::to_string(epoch) + ", batch starting at " +
                    std::to_string(bs) + ": " + e.what() +
                    " (inverted_frac=" + std::to_string(inverted_fraction(params)) +
                    ", clamp_events=" + std::to_string(epoch_clamps) + ")");
            }

            if (W > 1) {
                const std::size_t d2 = 2 * static_cast<std::size_t>(params.dim());
                for (auto& wg : grads) {
                    std::sort(wg.touched.begin(), wg.touched.end());
                    wg.touched.erase(std::unique(wg.touched.begin(), wg.touched.end()),
                                     wg.touched.end());
                    for (std::int32_t id : wg.touched) {
                        const std::size_t off = params.entity_min_offset(id);
                        for (std::size_t i = 0; i < d2; ++i) {
                            params.entities.grad[off + i] += wg.entities[off + i];
                            wg.entities[off + i] = 0.0;
                        }
                    }
                    wg.touched.clear();
                    for (std::size_t i = 0; i < wg.relations.size(); ++i) {
                        params.relations.grad[i] += wg.relations[i];
                        wg.relations[i] = 0.0;
                    }
                    for (std::size_t i = 0; i < wg.time_basis.size(); ++i) {
                        params.time_basis.grad[i] += wg.time_basis[i];
                        wg.time_basis[i] = 0.0;
                    }
                    for (std::size_t i = 0; i < wg.beta.size(); ++i) {
                        params.beta_param.grad[i] += wg.beta[i];
                        wg.beta[i] = 0.0;
                    }
                    epoch_term_sum += wg.term_sum;
                    epoch_clamps += wg.clamp_events;
                    wg.term_sum = 0.0;
                    wg.clamp_events = 0;
                }
            } else {
                epoch_term_sum += solo_term_sum;
                epoch_clamps += solo_clamps;
            }

            adam_step(tensors, adam, cfg.lr, cfg.adam_beta1, cfg.adam_beta2,
                      cfg.adam_eps, cfg.l2);
        }

        EpochRow row;
        row.epoch = epoch;
        const double total_terms =
            static_cast<double>(n) * static_cast<double>(1 + cfg.neg_ratio);
        row.loss = -epoch_term_sum / total_terms;
        row.inverted_frac = inverted_fraction(params);
        row.clamp_events = epoch_clamps;
        row.val_mrr = nan_value();
        row.val_hits10 = nan_value();
        row.val_loss = nan_value();
        row.best_val_loss = best_loss;

        const bool eval_now =
            (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) && !ds.valid.empty();
        if (eval_now) {
            EvalOptions eopt;
            eopt.setting = EvalSetting::Filtered;
            eopt.workers = W;
            eopt.sample_cap = cfg.eval_sample;
            const RankingReport rep =
                link_prediction(params, ds.valid, ds.seen, eopt);
            row.val_mrr = rep.mrr;
            row.val_hits10 = rep.hits10;
            row.val_loss =
                validation_loss(params, ds.valid, cfg.clamp_eps, W);
            if (std::isnan(best_loss) || row.val_loss < best_loss)
                best_loss = row.val_loss;
            row.best_val_loss = best_loss;
            if (rep.mrr > best_mrr) {
                best_mrr = rep.mrr;
                best_epoch = epoch;
                best = params;
                if (!cfg.out_dir.empty()) {
                    CheckpointMeta bm = meta;
                    bm.extra = "best_epoch=" + std::to_string(epoch) +
                               "\nbest_val_mrr=" + csv_num(best_mrr) + "\n" +
                               cfg.sidecar_extra;
                    save_checkpoint(cfg.out_dir / "best.ptbx", best, &bm);
                }
            }
        }

        row.wallclock_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        res.log.push_back(row);
        if (cfg.on_epoch) cfg.on_epoch(row);

        if (log_csv) {
            log_csv << row.epoch << ", " << csv_num(row.loss) << ", "
                    << csv_num(row.val_mrr) << ", " << csv_num(row.val_hits10)
                    << ", " << csv_num(row.wallclock_s, "%.3f") << "\n";
            log_csv.flush();
        }
        if (diag_csv) {
            diag_csv << row.epoch << ", " << csv_num(row.val_loss) << ", "
                     << csv_num(row.best_val_loss) << ", "
                     << csv_num(row.inverted_frac) << ", " << row.clamp_events
                     << "\n";
            diag_csv.flush();
        }
    }

    if (best_mrr < 0.0) {  // no validation pass ran; keep the final weights
        best = params;
        best_epoch = cfg.epochs;
    }
    if (!cfg.out_dir.empty()) {
        CheckpointMeta lm = meta;
        lm.extra = "epochs=" + std::to_string(cfg.epochs) + "\n" + cfg.sidecar_extra;
        save_checkpoint(cfg.out_dir / "last.ptbx", params, &lm);
        if (best_mrr < 0.0) {
            CheckpointMeta bm = meta;
            bm.extra =
                "best_epoch=" + std::to_string(best_epoch) + "\n" + cfg.sidecar_extra;
            save_checkpoint(cfg.out_dir / "best.ptbx", best, &bm);
        }
    }

    res.best_val_mrr = best_mrr < 0.0 ? nan_value() : best_mrr;
    res.best_val_loss = best_loss;
    res.best_epoch = best_epoch;
    res.params = std::move(params);
    res.best_params = std::move(best);
    return res;
}

}  // namespace ptbox
