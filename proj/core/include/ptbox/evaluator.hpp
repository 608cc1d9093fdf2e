#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ptbox/dataset.hpp"
#include "ptbox/model.hpp"

namespace ptbox {

enum class EvalSetting { Raw, Filtered };

struct RankingReport {
    double mr = 0.0;
    double mrr = 0.0;
    double hits1 = 0.0;
    double hits3 = 0.0;
    double hits10 = 0.0;
    std::size_t num_queries = 0;
    std::vector<double> ranks;  // per query, kept only when requested

    double hits(int k) const;
};

struct EvalOptions {
    EvalSetting setting = EvalSetting::Filtered;
    int workers = 1;
    bool keep_ranks = false;
    // evaluate only ~sample_cap evenly strided quadruples when > 0
    std::size_t sample_cap = 0;
};

// Mid-rank policy: 1 + #strictly-higher + #exact-ties/2, ties excluding the
// ground truth itself.
double rank_entity_query(const Quadruple& q, CorruptSlot slot,
                         const ModelParams& m,
                         std::span<const std::int32_t> candidates);

// Head and tail queries for every quadruple; metrics pooled over both
// directions. ranks are ordered [tail_0, head_0, tail_1, head_1, ...].
RankingReport link_prediction(const ModelParams& m,
                              const std::vector<Quadruple>& split,
                              const SeenIndex& seen, const EvalOptions& opt);

// Rank the true relation among all |R| sweeps of (h, ?, t, tau); raw setting
// (relations are few and rarely collide).
RankingReport relation_prediction(const ModelParams& m,
                                  const std::vector<Quadruple>& split,
                                  const EvalOptions& opt);

// --- inference-pattern probe ---------------------------------------------

struct ProbeInstance {
    std::string pattern;             // symmetry, antisymmetry, inversion,
                                     // composition, hierarchy, intersection,
                                     // mutual_exclusion
    std::vector<std::int32_t> ids;   // relation ids then entity ids, per pattern
};

struct ProbeOutcome {
    std::string pattern;
    bool satisfied = false;
    double stat = 0.0;       // pattern-specific left-hand value
    double reference = 0.0;  // pattern-specific right-hand value
    std::string detail;
};

struct PatternReport {
    std::vector<ProbeOutcome> outcomes;

    // satisfied / total for one pattern name
    std::pair<std::size_t, std::size_t> rate(const std::string& pattern) const;
};

// (relation ids, entity ids) a pattern instance takes; unknown name throws
// ConfigError
std::pair<int, int> probe_arity(const std::string& pattern);

// One instance per line: pattern name then ids, whitespace-separated, '#'
// comments. Numeric tokens are ids; other tokens need a vocabulary to resolve
// (relation names first, per the pattern's arity, then entity names).
std::vector<ProbeInstance> parse_probe_file(const std::filesystem::path& path,
                                            const Vocab* vocab);

// Table-style conditions at one fixed timestamp. Probabilities are the
// paper-form conditionals of the tau-evolved, relation-transformed boxes
// (both sides transformed), regardless of the configured score mode.
// Unknown pattern names throw ConfigError; probes whose conditioning box is
// numerically empty come back unsatisfied with a detail note.
PatternReport probe_patterns(const ModelParams& m,
                             std::span<const ProbeInstance> probes,
                             std::int32_t tau, double tol);

struct SelftestResult {
    PatternReport report;
    std::vector<bool> expected;  // per outcome
    bool all_as_expected = false;
};

// Built-in constructive suite: for each of the seven patterns, one
// hand-built configuration that must satisfy it and one that must violate it.
SelftestResult probe_selftest(double tol);

}  // namespace ptbox
