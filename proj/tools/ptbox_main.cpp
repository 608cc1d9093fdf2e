#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ptbox/checkpoint.hpp"
#include "ptbox/config.hpp"
#include "ptbox/dataset.hpp"
#include "ptbox/errors.hpp"
#include "ptbox/evaluator.hpp"
#include "ptbox/export.hpp"
#include "ptbox/model.hpp"
#include "ptbox/trainer.hpp"

namespace {

using namespace ptbox;

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

RunConfig build_config(const std::string& config_path,
                       const std::vector<std::string>& sets) {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    for (const std::string& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set needs key=value, got '" + kv + "'");
        apply_kv(cfg, kv.substr(0, eq), kv.substr(eq + 1), "--set");
    }
    return cfg;
}

Dataset load_data(const RunConfig& cfg) {
    if (cfg.data.dir.empty())
        throw ConfigError("no dataset directory (use --data or data.dir)");
    return load_dataset(cfg.data.dir, cfg.data.granularity, cfg.data.cap);
}

void print_ranking(const char* tag, const RunConfig& cfg,
                   const RankingReport& rep) {
    std::cout << "[" << tag << "] split=" << (cfg.eval.split == EvalSplit::Train
                                                  ? "train"
                              : cfg.eval.split == EvalSplit::Valid ? "valid"
                                                                   : "test")
              << " setting="
              << (cfg.eval.setting == EvalSetting::Filtered ? "filtered" : "raw")
              << " queries=" << rep.num_queries << "\n";
    std::cout << "[" << tag << "] MR=" << num(rep.mr) << " MRR=" << num(rep.mrr)
              << " Hits@1=" << num(rep.hits1) << " Hits@3=" << num(rep.hits3)
              << " Hits@10=" << num(rep.hits10) << "\n";
}

const std::vector<Quadruple>& pick_split(const Dataset& ds, EvalSplit split) {
    switch (split) {
        case EvalSplit::Train: return ds.train;
        case EvalSplit::Valid: return ds.valid;
        default: return ds.test;
    }
}

int cmd_train(const RunConfig& cfg) {
    const Dataset ds = load_data(cfg);
    std::cout << "dataset " << cfg.data.dir << ": |E|=" << ds.vocab.num_entities()
              << " |R|=" << ds.vocab.num_relations() << " train=" << ds.train.size()
              << " valid=" << ds.valid.size() << " test=" << ds.test.size()
              << " span=[" << ds.vocab.span().min_year << ", "
              << ds.vocab.span().max_year << "]\n";

    TrainConfig tc = cfg.train_config();
    tc.sidecar_extra = serialize_config(cfg);
    tc.on_epoch = [](const EpochRow& row) {
        std::cout << "epoch " << row.epoch << " loss " << num(row.loss);
        if (!std::isnan(row.val_mrr))
            std::cout << " val_mrr " << num(row.val_mrr) << " val_hits10 "
                      << num(row.val_hits10);
        std::printf(" (%.1fs)\n", row.wallclock_s);
        std::cout.flush();
    };
    if (!tc.out_dir.empty()) {
        std::filesystem::create_directories(tc.out_dir);
        std::ofstream rc(tc.out_dir / "config.resolved");
        rc << serialize_config(cfg);
    }

    const FitResult fr = fit(ds, cfg.model, tc);
    if (std::isnan(fr.best_val_mrr))
        std::cout << "done: " << fr.log.size() << " epochs (no validation ran)\n";
    else
        std::cout << "done: best epoch " << fr.best_epoch << " val_mrr "
                  << num(fr.best_val_mrr) << "\n";
    return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& ckpt) {
    CheckpointMeta meta;
    const ModelParams m = load_checkpoint(ckpt, &meta);
    const Dataset ds = load_data(cfg);
    if (meta.entities_hash == 0 && meta.relations_hash == 0)
        std::cerr << "warning: checkpoint has no sidecar; skipping vocabulary "
                     "check\n";
    else
        check_vocab_compatible(meta, ds.vocab);
    if (m.num_entities != ds.vocab.num_entities() ||
        m.num_relations != ds.vocab.num_relations())
        throw DataError("checkpoint shape does not match dataset vocabulary");

    const auto& split = pick_split(ds, cfg.eval.split);
    const EvalOptions opt = cfg.eval_options();
    if (cfg.eval.task != EvalTask::Relation)
        print_ranking("link", cfg, link_prediction(m, split, ds.seen, opt));
    if (cfg.eval.task != EvalTask::Link)
        print_ranking("relation", cfg, relation_prediction(m, split, opt));
    return 0;
}

int cmd_export_time(const std::string& ckpt, int from_year, int to_year,
                    bool have_range, const std::string& csv_path,
                    const std::string& pca_path) {
    const ModelParams m = load_checkpoint(ckpt);
    const TimeSpan span = m.codec.span;
    int lo = have_range ? from_year : span.min_year;
    int hi = have_range ? to_year : span.max_year;
    if (lo < span.min_year || hi > span.max_year) {
        std::cerr << "warning: requested years [" << lo << ", " << hi
                  << "] clamped to the model span [" << span.min_year << ", "
                  << span.max_year << "]\n";
        lo = std::max(lo, span.min_year);
        hi = std::min(hi, span.max_year);
    }
    if (lo > hi) throw ConfigError("year range does not intersect the model span");

    auto write_with = [&](const std::string& path, auto&& writer) {
        if (path.empty() || path == "-") {
            writer(std::cout);
        } else {
            std::ofstream os(path, std::ios::trunc);
            if (!os) throw DataError("cannot write " + path);
            writer(os);
        }
    };
    write_with(csv_path,
               [&](std::ostream& os) { export_time_embeddings(m, lo, hi, os); });
    if (!pca_path.empty())
        write_with(pca_path,
                   [&](std::ostream& os) { export_time_pca(m, lo, hi, os); });
    return 0;
}

int cmd_probe(const std::string& ckpt, const std::string& probes_path,
              const std::string& data_dir, bool have_tau, int tau, double tol,
              bool selftest) {
    if (selftest) {
        const SelftestResult res = probe_selftest(tol);
        for (std::size_t i = 0; i < res.report.outcomes.size(); ++i) {
            const ProbeOutcome& o = res.report.outcomes[i];
            const bool ok = o.satisfied == res.expected[i];
            std::cout << (ok ? "[ok]  " : "[BAD] ") << o.pattern << " "
                      << (o.satisfied ? "satisfied" : "unsatisfied")
                      << " (expected "
                      << (res.expected[i] ? "satisfied" : "unsatisfied") << "; "
                      << o.detail << ")\n";
        }
        std::cout << "selftest " << (res.all_as_expected ? "PASS" : "FAIL")
                  << "\n";
        if (!res.all_as_expected) throw NumericError("probe selftest failed");
        return 0;
    }

    if (ckpt.empty()) throw ConfigError("probe needs --checkpoint");
    if (probes_path.empty()) throw ConfigError("probe needs --probes");
    const ModelParams m = load_checkpoint(ckpt);

    const Vocab* vocab = nullptr;
    Dataset ds;
    if (!data_dir.empty()) {
        ds = load_dataset(data_dir, 1, 0);
        vocab = &ds.vocab;
    }
    const auto probes = parse_probe_file(probes_path, vocab);
    const std::int32_t at =
        have_tau ? tau
                 : (m.codec.span.min_year + m.codec.span.max_year) / 2;

    const PatternReport rep = probe_patterns(m, probes, at, tol);
    for (const ProbeOutcome& o : rep.outcomes)
        std::cout << o.pattern << " "
                  << (o.satisfied ? "satisfied" : "unsatisfied") << " stat="
                  << num(o.stat) << " ref=" << num(o.reference) << " (" << o.detail
                  << ")\n";
    for (const char* name :
         {"symmetry", "antisymmetry", "inversion", "composition", "hierarchy",
          "intersection", "mutual_exclusion"}) {
        const auto [sat, total] = rep.rate(name);
        if (total > 0)
            std::cout << "rate " << name << " " << sat << "/" << total << "\n";
    }
    return 0;
}

int cmd_inspect(const std::string& ckpt) {
    CheckpointMeta meta;
    const ModelParams m = load_checkpoint(ckpt, &meta);
    const ModelConfig& c = m.config;
    std::cout << "checkpoint " << ckpt << "\n"
              << "entities " << m.num_entities << "\n"
              << "relations " << m.num_relations << "\n"
              << "dim " << c.dim << "\n"
              << "order " << c.order_n << "\n"
              << "span [" << m.codec.span.min_year << ", "
              << m.codec.span.max_year << "]\n"
              << "beta " << num(m.beta_value())
              << (c.learn_beta ? " (learned)" : " (fixed)") << "\n"
              << "score_mode " << (c.score_mode == ScoreMode::Paper ? "paper" : "head")
              << "\n"
              << "meet_mode "
              << (c.meet_mode == MeetMode::Gumbel ? "gumbel" : "hard") << "\n"
              << "evolution "
              << (c.evolution_target == EvolutionTarget::Entity     ? "entity"
                  : c.evolution_target == EvolutionTarget::Relation ? "relation"
                                                                    : "both")
              << "\n"
              << "time_warp " << (c.time_warp == TimeWarp::Linear ? "linear" : "mlp")
              << "\n"
              << "normalize_time " << (c.normalize_time_vec ? "true" : "false")
              << "\n"
              << "trainable_parameters " << m.trainable_count() << "\n";
    if (meta.entities_hash != 0 || meta.relations_hash != 0) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%016llx",
                      static_cast<unsigned long long>(meta.entities_hash));
        std::cout << "entities_hash " << buf << "\n";
        std::snprintf(buf, sizeof buf, "%016llx",
                      static_cast<unsigned long long>(meta.relations_hash));
        std::cout << "relations_hash " << buf << "\n";
    }
    if (!meta.extra.empty()) std::cout << "sidecar:\n" << meta.extra;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PTBox temporal knowledge-graph embeddings"};
    app.require_subcommand(1);

    // shared option storage
    std::string config_path;
    std::vector<std::string> sets;
    std::string ckpt, data_dir, csv_path, pca_path, probes_path, out_dir;
    int from_year = 0, to_year = 0, tau = 0;
    double tol = 1e-6;
    bool selftest = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key=value config file");
        sub->add_option("--set", sets, "override one config key (key=value)");
    };
    auto add_sugar = [&](CLI::App* sub, std::initializer_list<
                                            std::pair<const char*, const char*>>
                                            flags) {
        for (auto [flag, key] : flags) {
            const std::string k = key;
            sub->add_option_function<std::string>(
                   flag,
                   [&, k](const std::string& v) { sets.push_back(k + "=" + v); })
                ->type_name("VALUE");
        }
    };

    CLI::App* train = app.add_subcommand("train", "fit a model");
    add_common(train);
    add_sugar(train, {{"--data", "data.dir"},
                      {"--dim", "model.dim"},
                      {"--order", "model.order"},
                      {"--lr", "train.lr"},
                      {"--epochs", "train.epochs"},
                      {"--batch-size", "train.batch_size"},
                      {"--neg-ratio", "train.neg_ratio"},
                      {"--eval-every", "train.eval_every"},
                      {"--out", "train.out_dir"},
                      {"--seed", "seed"},
                      {"--workers", "workers"}});

    CLI::App* eval = app.add_subcommand("eval", "rank a trained checkpoint");
    add_common(eval);
    eval->add_option("--checkpoint", ckpt, "model checkpoint (.ptbx)")
        ->required();
    add_sugar(eval, {{"--data", "data.dir"},
                     {"--task", "eval.task"},
                     {"--setting", "eval.setting"},
                     {"--split", "eval.split"},
                     {"--sample-cap", "eval.sample_cap"},
                     {"--workers", "workers"}});

    CLI::App* exp = app.add_subcommand("export-time",
                                       "per-year time embeddings as CSV");
    exp->add_option("--checkpoint", ckpt, "model checkpoint (.ptbx)")->required();
    CLI::Option* opt_from = exp->add_option("--from", from_year, "first year");
    CLI::Option* opt_to = exp->add_option("--to", to_year, "last year");
    exp->add_option("--csv", csv_path, "embeddings CSV ('-' = stdout)");
    exp->add_option("--pca", pca_path, "2-D PCA projection CSV");

    CLI::App* probe = app.add_subcommand("probe", "inference-pattern probes");
    probe->add_option("--checkpoint", ckpt, "model checkpoint (.ptbx)");
    probe->add_option("--probes", probes_path, "probe spec file");
    probe->add_option("--data", data_dir, "dataset dir for name resolution");
    CLI::Option* opt_tau = probe->add_option("--tau", tau, "probe year");
    probe->add_option("--tol", tol, "probability tolerance");
    probe->add_flag("--selftest", selftest, "run the built-in constructive suite");

    CLI::App* inspect = app.add_subcommand("inspect", "print checkpoint header");
    inspect->add_option("--checkpoint", ckpt, "model checkpoint (.ptbx)")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (train->parsed()) return cmd_train(build_config(config_path, sets));
        if (eval->parsed()) return cmd_eval(build_config(config_path, sets), ckpt);
        if (exp->parsed()) {
            const bool have_range = opt_from->count() > 0 || opt_to->count() > 0;
            if (opt_from->count() > 0 && opt_to->count() == 0) to_year = from_year;
            if (opt_to->count() > 0 && opt_from->count() == 0) from_year = to_year;
            return cmd_export_time(ckpt, from_year, to_year, have_range, csv_path,
                                   pca_path);
        }
        if (probe->parsed())
            return cmd_probe(ckpt, probes_path, data_dir, opt_tau->count() > 0,
                             tau, tol, selftest);
        if (inspect->parsed()) return cmd_inspect(ckpt);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
