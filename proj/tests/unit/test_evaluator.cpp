#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <vector>

#include "ptbox/errors.hpp"
#include "ptbox/evaluator.hpp"
#include "support/tmpdir.hpp"

using namespace ptbox;

namespace {

ModelParams eval_model(std::uint64_t seed = 17, std::int32_t E = 8,
                       std::int32_t R = 3) {
    ModelConfig cfg;
    cfg.dim = 4;
    cfg.order_n = 2;
    cfg.beta = 0.1;
    Rng rng(seed);
    return init_params(E, R, TimeSpan{2000, 2010}, cfg, rng);
}

// Every entity as candidate: the raw-setting rank.
double brute_rank(const ModelParams& m, const Quadruple& q, CorruptSlot slot) {
    const std::int32_t truth = slot == CorruptSlot::Tail ? q.t : q.h;
    const double s_true = log_score(m, q);
    std::size_t higher = 0, ties = 0;
    for (std::int32_t c = 0; c < m.num_entities; ++c) {
        if (c == truth) continue;
        Quadruple qc = q;
        (slot == CorruptSlot::Tail ? qc.t : qc.h) = c;
        const double s = log_score(m, qc);
        if (s > s_true) ++higher;
        else if (s == s_true) ++ties;
    }
    return 1.0 + static_cast<double>(higher) + static_cast<double>(ties) / 2.0;
}

}  // namespace

TEST_CASE("rank_entity_query matches a brute-force rescore") {
    auto m = eval_model();
    std::vector<std::int32_t> all(static_cast<std::size_t>(m.num_entities));
    std::iota(all.begin(), all.end(), 0);
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        Quadruple q{static_cast<std::int32_t>(rng.below(8)),
                    static_cast<std::int32_t>(rng.below(3)),
                    static_cast<std::int32_t>(rng.below(8)),
                    static_cast<std::int32_t>(2000 + rng.below(11))};
        for (auto slot : {CorruptSlot::Tail, CorruptSlot::Head}) {
            CHECK(rank_entity_query(q, slot, m, all) ==
                  doctest::Approx(brute_rank(m, q, slot)));
        }
    }
}

TEST_CASE("exact ties take the mid-rank") {
    auto m = eval_model();
    // Clone entity 1's corners into entities 2 and 3: three-way tie.
    const auto d2 = static_cast<std::size_t>(2 * m.dim());
    for (std::int32_t clone : {2, 3}) {
        std::copy_n(m.entities.value.begin() + static_cast<std::ptrdiff_t>(m.entity_min_offset(1)),
                    d2,
                    m.entities.value.begin() + static_cast<std::ptrdiff_t>(m.entity_min_offset(clone)));
    }
    Quadruple q{0, 0, 1, 2005};
    std::vector<std::int32_t> all(static_cast<std::size_t>(m.num_entities));
    std::iota(all.begin(), all.end(), 0);
    double with_ties = rank_entity_query(q, CorruptSlot::Tail, m, all);

    // Remove the clones from the candidate list: the tie bonus vanishes.
    std::vector<std::int32_t> no_clones;
    for (std::int32_t c : all)
        if (c != 2 && c != 3) no_clones.push_back(c);
    double without = rank_entity_query(q, CorruptSlot::Tail, m, no_clones);
    CHECK(with_ties == doctest::Approx(without + 1.0));  // 2 ties / 2
}

TEST_CASE("link_prediction pools tail and head queries") {
    auto m = eval_model();
    std::vector<Quadruple> split = {{0, 0, 1, 2003}, {4, 1, 5, 2007}, {2, 2, 6, 2001}};
    SeenIndex seen;
    for (const auto& q : split) seen.insert(q);
    seen.finalize();

    EvalOptions opt;
    opt.setting = EvalSetting::Raw;
    opt.keep_ranks = true;
    auto rep = link_prediction(m, split, seen, opt);

    CHECK(rep.num_queries == 6);
    REQUIRE(rep.ranks.size() == 6);
    for (size_t i = 0; i < split.size(); ++i) {
        CHECK(rep.ranks[2 * i] ==
              doctest::Approx(brute_rank(m, split[i], CorruptSlot::Tail)));
        CHECK(rep.ranks[2 * i + 1] ==
              doctest::Approx(brute_rank(m, split[i], CorruptSlot::Head)));
    }

    double mr = 0.0, mrr = 0.0;
    for (double r : rep.ranks) {
        mr += r;
        mrr += 1.0 / r;
    }
    CHECK(rep.mr == doctest::Approx(mr / 6.0));
    CHECK(rep.mrr == doctest::Approx(mrr / 6.0));

    // Parallel evaluation returns the same report.
    EvalOptions par = opt;
    par.workers = 3;
    auto rep2 = link_prediction(m, split, seen, par);
    CHECK(rep2.mr == rep.mr);
    CHECK(rep2.mrr == rep.mrr);
    CHECK(rep2.ranks == rep.ranks);
}

TEST_CASE("filtering removes competing truths from the ranking") {
    auto m = eval_model(99);
    // Force a strong competitor: make entity 2 score above everything for
    // tail queries by cloning the head box (self-containment scores high).
    std::vector<Quadruple> split = {{0, 0, 1, 2005}};
    SeenIndex seen;
    seen.insert({0, 0, 1, 2005});
    seen.insert({0, 0, 2, 2005});  // competing truth, same time
    seen.insert({0, 0, 3, 2006});  // different time: stays a distractor
    seen.finalize();

    EvalOptions raw;
    raw.setting = EvalSetting::Raw;
    raw.keep_ranks = true;
    EvalOptions filt = raw;
    filt.setting = EvalSetting::Filtered;

    auto r_raw = link_prediction(m, split, seen, raw);
    auto r_filt = link_prediction(m, split, seen, filt);
    // Filtered rank can only improve (drop) or stay, never worsen.
    CHECK(r_filt.ranks[0] <= r_raw.ranks[0]);
    CHECK(r_filt.ranks[1] <= r_raw.ranks[1]);
    CHECK(r_filt.mrr >= r_raw.mrr);
}

TEST_CASE("hits precomputes 1/3/10 and serves other k from kept ranks") {
    auto m = eval_model();
    std::vector<Quadruple> split = {{0, 0, 1, 2003}, {4, 1, 5, 2007}};
    SeenIndex seen;
    for (const auto& q : split) seen.insert(q);
    seen.finalize();

    EvalOptions opt;
    opt.keep_ranks = false;
    auto rep = link_prediction(m, split, seen, opt);
    CHECK(rep.hits(1) == rep.hits1);
    CHECK(rep.hits(10) == rep.hits10);
    CHECK_THROWS_AS((void)rep.hits(5), ConfigError);

    opt.keep_ranks = true;
    auto kept = link_prediction(m, split, seen, opt);
    std::size_t manual = 0;
    for (double r : kept.ranks)
        if (r <= 5.0) ++manual;
    CHECK(kept.hits(5) ==
          doctest::Approx(static_cast<double>(manual) /
                          static_cast<double>(kept.ranks.size())));
    CHECK(kept.hits1 <= kept.hits3);
    CHECK(kept.hits3 <= kept.hits10);
}

TEST_CASE("sample_cap strides the split deterministically") {
    auto m = eval_model();
    std::vector<Quadruple> split;
    for (std::int32_t i = 0; i < 8; ++i)
        split.push_back({i % 8, 0, (i + 1) % 8, 2000 + i});
    SeenIndex seen;
    for (const auto& q : split) seen.insert(q);
    seen.finalize();

    EvalOptions opt;
    opt.sample_cap = 3;
    opt.keep_ranks = true;
    auto rep = link_prediction(m, split, seen, opt);
    CHECK(rep.num_queries == 6);  // 3 quads x 2 directions

    auto rep2 = link_prediction(m, split, seen, opt);
    CHECK(rep.ranks == rep2.ranks);

    EvalOptions all;
    all.sample_cap = 100;  // larger than the split: everything
    auto rep3 = link_prediction(m, split, seen, all);
    CHECK(rep3.num_queries == 16);
}

TEST_CASE("relation_prediction ranks the true relation") {
    auto m = eval_model(7, 6, 4);
    std::vector<Quadruple> split = {{0, 2, 1, 2004}, {3, 0, 5, 2009}};
    EvalOptions opt;
    opt.keep_ranks = true;
    auto rep = relation_prediction(m, split, opt);
    REQUIRE(rep.ranks.size() == 2);
    CHECK(rep.num_queries == 2);

    for (size_t i = 0; i < split.size(); ++i) {
        const auto& q = split[i];
        double s_true = log_score(m, q);
        std::size_t higher = 0, ties = 0;
        for (std::int32_t r = 0; r < m.num_relations; ++r) {
            if (r == q.r) continue;
            Quadruple qr = q;
            qr.r = r;
            double s = log_score(m, qr);
            if (s > s_true) ++higher;
            else if (s == s_true) ++ties;
        }
        double want = 1.0 + static_cast<double>(higher) +
                      static_cast<double>(ties) / 2.0;
        CHECK(rep.ranks[i] == doctest::Approx(want));
        CHECK(rep.ranks[i] >= 1.0);
        CHECK(rep.ranks[i] <= static_cast<double>(m.num_relations));
    }
}

TEST_CASE("probe_arity fixes each pattern's id layout") {
    CHECK(probe_arity("symmetry") == std::pair{1, 2});
    CHECK(probe_arity("antisymmetry") == std::pair{1, 2});
    CHECK(probe_arity("inversion") == std::pair{2, 2});
    CHECK(probe_arity("hierarchy") == std::pair{2, 2});
    CHECK(probe_arity("mutual_exclusion") == std::pair{2, 2});
    CHECK(probe_arity("composition") == std::pair{3, 3});
    CHECK(probe_arity("intersection") == std::pair{3, 2});
    CHECK_THROWS_AS((void)probe_arity("transitivity"), ConfigError);
}

TEST_CASE("parse_probe_file reads ids, names and comments") {
    testsupport::TempDir tmp;
    auto path = tmp.path() / "probes.txt";
    {
        std::ofstream out(path);
        out << "# a comment line\n"
               "symmetry 0 1 2   # trailing comment\n"
               "\n"
               "composition 0 1 2 3 4 5\n";
    }
    auto probes = parse_probe_file(path, nullptr);
    REQUIRE(probes.size() == 2);
    CHECK(probes[0].pattern == "symmetry");
    CHECK(probes[0].ids == std::vector<std::int32_t>{0, 1, 2});
    CHECK(probes[1].ids.size() == 6);

    // Name resolution needs a vocabulary: relations first, then entities.
    std::vector<RawFact> train = {{"alice", "knows", "bob", 2000, 2000, false, false}};
    auto vocab = build_vocab(train, {}, {});
    {
        std::ofstream out(path);
        out << "symmetry knows alice bob\n";
    }
    auto named = parse_probe_file(path, &vocab);
    REQUIRE(named.size() == 1);
    CHECK(named[0].ids == std::vector<std::int32_t>{0, 0, 1});

    {
        std::ofstream out(path);
        out << "symmetry knows alice bob\n";
    }
    CHECK_THROWS_AS((void)parse_probe_file(path, nullptr), ConfigError);

    {
        std::ofstream out(path);
        out << "symmetry 0 1\n";  // one id short
    }
    CHECK_THROWS_WITH_AS((void)parse_probe_file(path, nullptr),
                         doctest::Contains(":1"), ConfigError);

    {
        std::ofstream out(path);
        out << "notapattern 0 1\n";
    }
    CHECK_THROWS_AS((void)parse_probe_file(path, nullptr), ConfigError);
    CHECK_THROWS_AS((void)parse_probe_file(tmp.path() / "nope.txt", nullptr),
                    DataError);
}

TEST_CASE("probe selftest satisfies and violates all seven patterns") {
    auto res = probe_selftest(1e-6);
    CHECK(res.all_as_expected);
    REQUIRE(res.report.outcomes.size() == res.expected.size());
    REQUIRE(res.report.outcomes.size() == 14);

    // One satisfied and one violated instance per pattern.
    for (const char* name :
         {"symmetry", "antisymmetry", "inversion", "composition", "hierarchy",
          "intersection", "mutual_exclusion"}) {
        auto [sat, total] = res.report.rate(name);
        CHECK(total == 2);
        CHECK(sat == 1);
    }

    // Same verdicts at a laxer tolerance still.
    auto lax = probe_selftest(1e-3);
    CHECK(lax.all_as_expected);
}

TEST_CASE("probe_patterns validates ids and pattern names") {
    auto m = eval_model();
    ProbeInstance bad;
    bad.pattern = "symmetry";
    bad.ids = {0, 1};  // missing one entity id
    std::vector<ProbeInstance> probes = {bad};
    CHECK_THROWS_AS((void)probe_patterns(m, probes, 2005, 1e-6), ConfigError);

    probes[0].pattern = "reflexivity";
    probes[0].ids = {0, 0, 0};
    CHECK_THROWS_AS((void)probe_patterns(m, probes, 2005, 1e-6), ConfigError);
}
