#include "ptbox/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ptbox/errors.hpp"
#include "ptbox/parallel.hpp"

namespace ptbox {
namespace {

RankingReport finalize(std::vector<double> ranks, bool keep) {
    RankingReport rep;
    rep.num_queries = ranks.size();
    if (ranks.empty()) return rep;
    double mr = 0.0, mrr = 0.0;
    std::size_t h1 = 0, h3 = 0, h10 = 0;
    for (double r : ranks) {
        mr += r;
        mrr += 1.0 / r;
        if (r <= 1.0) ++h1;
        if (r <= 3.0) ++h3;
        if (r <= 10.0) ++h10;
    }
    const double n = static_cast<double>(ranks.size());
    rep.mr = mr / n;
    rep.mrr = mrr / n;
    rep.hits1 = h1 / n;
    rep.hits3 = h3 / n;
    rep.hits10 = h10 / n;
    if (keep) rep.ranks = std::move(ranks);
    return rep;
}

// Rank the true entity for one query against every entity id, optionally
// skipping known-true competitors at the same timestamp.
double rank_one(Scorer& scorer, const Quadruple& q, CorruptSlot slot,
                const ModelParams& m, const SeenIndex* seen) {
    const std::int32_t truth = slot == CorruptSlot::Tail ? q.t : q.h;
    const std::int32_t fixed = slot == CorruptSlot::Tail ? q.h : q.t;
    scorer.begin_query(q.r, q.tau, slot, fixed);
    const double s_true = scorer.swept_log_score(truth);

    std::span<const std::int32_t> competing;
    if (seen)
        competing = slot == CorruptSlot::Tail ? seen->tails_for(q.h, q.r, q.tau)
                                              : seen->heads_for(q.t, q.r, q.tau);

    std::size_t higher = 0, ties = 0;
    for (std::int32_t c = 0; c < m.num_entities; ++c) {
        if (c == truth) continue;
        if (!competing.empty() &&
            std::binary_search(competing.begin(), competing.end(), c))
            continue;
        const double s = scorer.swept_log_score(c);
        if (s > s_true)
            ++higher;
        else if (s == s_true)
            ++ties;
    }
    return 1.0 + static_cast<double>(higher) + static_cast<double>(ties) * 0.5;
}

// ~cap evenly strided positions over [0, size); all of them when cap is 0 or
// already covers the split.
std::vector<std::size_t> strided_sample(std::size_t size, std::size_t cap) {
    std::vector<std::size_t> idx;
    if (cap == 0 || cap >= size) {
        idx.resize(size);
        for (std::size_t i = 0; i < size; ++i) idx[i] = i;
        return idx;
    }
    idx.reserve(cap);
    for (std::size_t i = 0; i < cap; ++i) idx.push_back(i * size / cap);
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    return idx;
}

}  // namespace

double RankingReport::hits(int k) const {
    if (k == 1) return hits1;
    if (k == 3) return hits3;
    if (k == 10) return hits10;
    if (ranks.empty())
        throw ConfigError("hits@" + std::to_string(k) +
                          " needs kept ranks (only 1/3/10 are precomputed)");
    std::size_t h = 0;
    for (double r : ranks)
        if (r <= static_cast<double>(k)) ++h;
    return static_cast<double>(h) / static_cast<double>(ranks.size());
}

double rank_entity_query(const Quadruple& q, CorruptSlot slot,
                         const ModelParams& m,
                         std::span<const std::int32_t> candidates) {
    Scorer scorer(m);
    const std::int32_t truth = slot == CorruptSlot::Tail ? q.t : q.h;
    const std::int32_t fixed = slot == CorruptSlot::Tail ? q.h : q.t;
    scorer.begin_query(q.r, q.tau, slot, fixed);
    const double s_true = scorer.swept_log_score(truth);
    std::size_t higher = 0, ties = 0;
    for (std::int32_t c : candidates) {
        if (c == truth) continue;
        const double s = scorer.swept_log_score(c);
        if (s > s_true)
            ++higher;
        else if (s == s_true)
            ++ties;
    }
    return 1.0 + static_cast<double>(higher) + static_cast<double>(ties) * 0.5;
}

RankingReport link_prediction(const ModelParams& m,
                              const std::vector<Quadruple>& split,
                              const SeenIndex& seen, const EvalOptions& opt) {
    const auto idx = strided_sample(split.size(), opt.sample_cap);
    std::vector<double> ranks(idx.size() * 2, 0.0);
    const SeenIndex* filter =
        opt.setting == EvalSetting::Filtered ? &seen : nullptr;

    parallel_chunks(idx.size(), opt.workers,
                    [&](int, std::size_t lo, std::size_t hi) {
                        Scorer scorer(m);
                        for (std::size_t i = lo; i < hi; ++i) {
                            const Quadruple& q = split[idx[i]];
                            ranks[2 * i] =
                                rank_one(scorer, q, CorruptSlot::Tail, m, filter);
                            ranks[2 * i + 1] =
                                rank_one(scorer, q, CorruptSlot::Head, m, filter);
                        }
                    });
    return finalize(std::move(ranks), opt.keep_ranks);
}

RankingReport relation_prediction(const ModelParams& m,
                                  const std::vector<Quadruple>& split,
                                  const EvalOptions& opt) {
    const auto idx = strided_sample(split.size(), opt.sample_cap);
    std::vector<double> ranks(idx.size(), 0.0);

    parallel_chunks(idx.size(), opt.workers,
                    [&](int, std::size_t lo, std::size_t hi) {
                        Scorer scorer(m);
                        for (std::size_t i = lo; i < hi; ++i) {
                            const Quadruple& q = split[idx[i]];
                            double s_true = 0.0;
                            std::vector<double> scores(
                                static_cast<std::size_t>(m.num_relations));
                            for (std::int32_t r = 0; r < m.num_relations; ++r) {
                                scorer.begin_query(r, q.tau, CorruptSlot::Tail, q.h);
                                scores[static_cast<std::size_t>(r)] =
                                    scorer.swept_log_score(q.t);
                                if (r == q.r)
                                    s_true = scores[static_cast<std::size_t>(r)];
                            }
                            std::size_t higher = 0, ties = 0;
                            for (std::int32_t r = 0; r < m.num_relations; ++r) {
                                if (r == q.r) continue;
                                const double s = scores[static_cast<std::size_t>(r)];
                                if (s > s_true)
                                    ++higher;
                                else if (s == s_true)
                                    ++ties;
                            }
                            ranks[i] = 1.0 + static_cast<double>(higher) +
                                       static_cast<double>(ties) * 0.5;
                        }
                    });
    return finalize(std::move(ranks), opt.keep_ranks);
}

// --- inference-pattern probe -------------------------------------------------

namespace {

struct ProbeCtx {
    const ModelParams& m;
    std::vector<double> w;  // time vector at the probe timestamp
    MeetMode mode;

    // tau-evolved, relation-transformed box of entity e under relation r
    GumbelBox box(std::int32_t r, std::int32_t e) const {
        GumbelBox b = entity_box(m, e);
        const auto target = m.config.evolution_target;
        if (target != EvolutionTarget::Relation)
            b = temporal_project_box(b, w);
        RelationVecs rel = relation_vecs(m, r);
        if (target != EvolutionTarget::Entity)
            rel = temporal_project_vec(rel, w);
        return relation_transform(b, rel);
    }

    // P_r(e1 | e2)
    double prob(std::int32_t r, std::int32_t e1, std::int32_t e2) const {
        return conditional_prob(box(r, e1), box(r, e2), mode);
    }

    // P_{r1,r2}(e1 | e2) with I(e) = T_r1(e) ∧ T_r2(e)
    double joint_prob(std::int32_t r1, std::int32_t r2, std::int32_t e1,
                      std::int32_t e2) const {
        const GumbelBox i1 = meet(box(r1, e1), box(r2, e1), mode);
        const GumbelBox i2 = meet(box(r1, e2), box(r2, e2), mode);
        return conditional_prob(i1, i2, mode);
    }
};

void need_ids(const ProbeInstance& p, std::size_t relations, std::size_t entities) {
    if (p.ids.size() != relations + entities)
        throw ConfigError("probe pattern '" + p.pattern + "' takes " +
                          std::to_string(relations) + " relation ids and " +
                          std::to_string(entities) + " entity ids, got " +
                          std::to_string(p.ids.size()));
}

}  // namespace

std::pair<int, int> probe_arity(const std::string& pattern) {
    if (pattern == "symmetry" || pattern == "antisymmetry") return {1, 2};
    if (pattern == "inversion" || pattern == "hierarchy" ||
        pattern == "mutual_exclusion")
        return {2, 2};
    if (pattern == "composition") return {3, 3};
    if (pattern == "intersection") return {3, 2};
    throw ConfigError("unknown probe pattern: " + pattern);
}

std::vector<ProbeInstance> parse_probe_file(const std::filesystem::path& path,
                                            const Vocab* vocab) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open probe file: " + path.string());
    std::vector<ProbeInstance> probes;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        std::istringstream ls(line);
        std::string pattern;
        if (!(ls >> pattern)) continue;  // blank line
        const auto where = path.string() + ":" + std::to_string(lineno);
        const auto [nrel, nent] = probe_arity(pattern);  // validates the name
        ProbeInstance p;
        p.pattern = pattern;
        std::string tok;
        while (ls >> tok) {
            std::size_t used = 0;
            std::int32_t id = 0;
            bool numeric = false;
            try {
                id = static_cast<std::int32_t>(std::stol(tok, &used));
                numeric = used == tok.size();
            } catch (const std::exception&) {
                numeric = false;
            }
            if (!numeric) {
                if (!vocab)
                    throw ConfigError(where + ": '" + tok +
                                      "' is not numeric and no vocabulary was "
                                      "given to resolve names");
                const bool is_rel =
                    p.ids.size() < static_cast<std::size_t>(nrel);
                id = is_rel ? vocab->relation_id(tok) : vocab->entity_id(tok);
            }
            p.ids.push_back(id);
        }
        if (p.ids.size() != static_cast<std::size_t>(nrel + nent))
            throw ConfigError(where + ": pattern '" + pattern + "' takes " +
                              std::to_string(nrel) + "+" + std::to_string(nent) +
                              " ids, got " + std::to_string(p.ids.size()));
        probes.push_back(std::move(p));
    }
    return probes;
}

namespace {

std::string fmt2(const char* a_name, double a, const char* b_name, double b) {
    std::ostringstream os;
    os << a_name << "=" << a << " " << b_name << "=" << b;
    return os.str();
}

ProbeOutcome run_probe(const ProbeCtx& ctx, const ProbeInstance& p, double tol) {
    ProbeOutcome out;
    out.pattern = p.pattern;
    const auto& id = p.ids;

    if (p.pattern == "symmetry") {
        need_ids(p, 1, 2);
        const double p12 = ctx.prob(id[0], id[1], id[2]);
        const double p21 = ctx.prob(id[0], id[2], id[1]);
        out.stat = std::fabs(p12 - p21);
        out.reference = std::min(p12, p21);
        out.satisfied = p12 > tol && p21 > tol && out.stat <= tol;
        out.detail = fmt2("p12", p12, "p21", p21);
    } else if (p.pattern == "antisymmetry") {
        need_ids(p, 1, 2);
        const double p12 = ctx.prob(id[0], id[1], id[2]);
        const double p21 = ctx.prob(id[0], id[2], id[1]);
        out.stat = p12;
        out.reference = p21;
        out.satisfied = p12 > tol && p21 <= tol;
        out.detail = fmt2("p12", p12, "p21", p21);
    } else if (p.pattern == "inversion") {
        need_ids(p, 2, 2);
        const double pf = ctx.prob(id[0], id[2], id[3]);
        const double pb = ctx.prob(id[1], id[3], id[2]);
        out.stat = pf;
        out.reference = pb;
        out.satisfied = pf > tol && pb > tol && std::fabs(pf - pb) <= tol;
        out.detail = fmt2("forward", pf, "backward", pb);
    } else if (p.pattern == "composition") {
        need_ids(p, 3, 3);
        const double j = joint_prob3(ctx.box(id[0], id[3]), ctx.box(id[1], id[4]),
                                     ctx.box(id[2], id[5]), ctx.mode);
        out.stat = j;
        out.reference = tol;
        out.satisfied = j >= tol;
        out.detail = fmt2("joint", j, "tol", tol);
    } else if (p.pattern == "hierarchy") {
        need_ids(p, 2, 2);
        const double pj = ctx.joint_prob(id[0], id[1], id[2], id[3]);
        const double p1 = ctx.prob(id[0], id[2], id[3]);
        const double p2 = ctx.prob(id[1], id[2], id[3]);
        out.stat = pj;
        out.reference = p1 * p2;
        out.satisfied = pj >= p1 * p2 - tol;
        out.detail = fmt2("joint", pj, "product", p1 * p2);
    } else if (p.pattern == "intersection") {
        need_ids(p, 3, 2);
        const double pj = ctx.joint_prob(id[0], id[1], id[3], id[4]);
        const double p3 = ctx.prob(id[2], id[3], id[4]);
        out.stat = p3;
        out.reference = pj;
        out.satisfied = p3 >= pj - tol;
        out.detail = fmt2("both", pj, "third", p3);
    } else if (p.pattern == "mutual_exclusion") {
        need_ids(p, 2, 2);
        const GumbelBox i1 = meet(ctx.box(id[0], id[2]), ctx.box(id[0], id[3]),
                                  ctx.mode);
        const GumbelBox i2 = meet(ctx.box(id[1], id[2]), ctx.box(id[1], id[3]),
                                  ctx.mode);
        const GumbelBox both = meet(i1, i2, ctx.mode);
        const double v = std::exp(expected_volume(both).log_volume);
        out.stat = v;
        out.reference = tol;
        out.satisfied = v <= tol;
        out.detail = fmt2("overlap", v, "tol", tol);
    } else {
        throw ConfigError("unknown probe pattern: " + p.pattern);
    }
    return out;
}

}  // namespace

PatternReport probe_patterns(const ModelParams& m,
                             std::span<const ProbeInstance> probes,
                             std::int32_t tau, double tol) {
    ProbeCtx ctx{m, time_vector(m, tau), m.config.meet_mode};
    PatternReport rep;
    rep.outcomes.reserve(probes.size());
    for (const auto& p : probes) {
        try {
            rep.outcomes.push_back(run_probe(ctx, p, tol));
        } catch (const NumericError& e) {
            ProbeOutcome out;
            out.pattern = p.pattern;
            out.satisfied = false;
            out.detail = std::string("numerically degenerate: ") + e.what();
            rep.outcomes.push_back(std::move(out));
        }
    }
    return rep;
}

std::pair<std::size_t, std::size_t> PatternReport::rate(
    const std::string& pattern) const {
    std::size_t sat = 0, total = 0;
    for (const auto& o : outcomes)
        if (o.pattern == pattern) {
            ++total;
            if (o.satisfied) ++sat;
        }
    return {sat, total};
}

// --- selftest ----------------------------------------------------------------

namespace {

void set_entity(ModelParams& m, std::int32_t id, std::initializer_list<double> mn,
                std::initializer_list<double> mx) {
    std::copy(mn.begin(), mn.end(),
              m.entities.value.begin() + static_cast<std::ptrdiff_t>(m.entity_min_offset(id)));
    std::copy(mx.begin(), mx.end(),
              m.entities.value.begin() + static_cast<std::ptrdiff_t>(m.entity_max_offset(id)));
}

void set_relation(ModelParams& m, std::int32_t id, std::initializer_list<double> tr,
                  std::initializer_list<double> ls) {
    std::copy(tr.begin(), tr.end(),
              m.relations.value.begin() + static_cast<std::ptrdiff_t>(m.rel_translation_offset(id)));
    std::copy(ls.begin(), ls.end(),
              m.relations.value.begin() + static_cast<std::ptrdiff_t>(m.rel_log_scale_offset(id)));
}

}  // namespace

SelftestResult probe_selftest(double tol) {
    // Hand-built 2-d world with hard meets and a small smoothing scale, so
    // every expected outcome can be worked out on paper. Relations: 0 is the
    // identity, 1 doubles the first axis, 2 shrinks both axes to 1e-4 of
    // their size, 3 and 4 translate the first axis by -10 / +10.
    ModelConfig cfg;
    cfg.dim = 2;
    cfg.order_n = 1;
    cfg.beta = 1e-3;
    cfg.meet_mode = MeetMode::Hard;
    Rng rng(1);
    ModelParams m = init_params(7, 5, TimeSpan{0, 0}, cfg, rng);
    std::fill(m.time_basis.value.begin(), m.time_basis.value.end(), 0.0);
    std::fill(m.relations.value.begin(), m.relations.value.end(), 0.0);

    set_entity(m, 0, {0.0, 0.0}, {1.0, 1.0});         // unit box
    set_entity(m, 1, {0.0, 0.0}, {1.0, 1.0});         // its twin
    set_entity(m, 2, {0.0, 0.0}, {0.5, 1.0});         // left half
    set_entity(m, 3, {0.45, 0.45}, {0.4501, 0.4501}); // speck inside the unit box
    set_entity(m, 4, {10.0, 10.0}, {11.0, 11.0});     // far away
    set_entity(m, 5, {0.0, 0.0}, {2.0, 1.0});         // wide
    set_entity(m, 6, {1.0, 0.0}, {3.0, 1.0});         // wide, shifted right

    set_relation(m, 1, {0.0, 0.0}, {std::log(2.0), 0.0});
    const double tiny = std::log(1e-4);
    set_relation(m, 2, {0.0, 0.0}, {tiny, tiny});
    set_relation(m, 3, {-10.0, 0.0}, {0.0, 0.0});
    set_relation(m, 4, {10.0, 0.0}, {0.0, 0.0});

    std::vector<ProbeInstance> probes = {
        {"symmetry", {0, 0, 1}},
        {"symmetry", {0, 0, 2}},
        {"antisymmetry", {0, 0, 3}},
        {"antisymmetry", {0, 0, 1}},
        {"inversion", {0, 1, 0, 1}},
        {"inversion", {0, 0, 0, 2}},
        {"composition", {0, 0, 0, 0, 1, 0}},
        {"composition", {0, 0, 0, 0, 1, 4}},
        {"hierarchy", {0, 0, 2, 0}},
        {"hierarchy", {0, 1, 5, 6}},
        {"intersection", {0, 0, 0, 0, 1}},
        {"intersection", {2, 2, 0, 5, 6}},
        {"mutual_exclusion", {3, 4, 0, 2}},
        {"mutual_exclusion", {3, 3, 0, 2}},
    };

    SelftestResult res;
    res.expected = {true, false, true, false, true, false, true,
                    false, true, false, true, false, true, false};
    res.report = probe_patterns(m, probes, 0, tol);
    res.all_as_expected = res.report.outcomes.size() == res.expected.size();
    for (std::size_t i = 0; res.all_as_expected && i < res.expected.size(); ++i)
        if (res.report.outcomes[i].satisfied != res.expected[i])
            res.all_as_expected = false;
    return res;
}

}  // namespace ptbox
