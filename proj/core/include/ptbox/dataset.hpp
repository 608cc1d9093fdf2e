#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ptbox/rng.hpp"
#include "ptbox/time_codec.hpp"

namespace ptbox {

// One parsed line: names still strings, dates at year granularity. A date
// whose year is wildcarded ("####-##-##") is open on that side.
struct RawFact {
    std::string head;
    std::string relation;
    std::string tail;
    int since_year = 0;
    int until_year = 0;
    bool since_open = false;
    bool until_open = false;
};

struct Quadruple {
    std::int32_t h = 0;
    std::int32_t r = 0;
    std::int32_t t = 0;
    std::int32_t tau = 0;

    bool operator==(const Quadruple&) const = default;
};

enum class DatasetFormat { HyTE };  // 5-column TSV: h, r, t, since, until

enum class CorruptSlot { Head, Tail };

class Vocab {
  public:
    std::int32_t entity_id(const std::string& name) const;
    std::int32_t relation_id(const std::string& name) const;
    const std::string& entity_name(std::int32_t id) const;
    const std::string& relation_name(std::int32_t id) const;

    std::int32_t num_entities() const { return static_cast<std::int32_t>(entities_.size()); }
    std::int32_t num_relations() const { return static_cast<std::int32_t>(relations_.size()); }
    TimeSpan span() const { return span_; }

    // FNV-1a over the ordered name lists; checkpoint sidecars store these so
    // a model is never evaluated against the wrong vocabulary.
    std::uint64_t entities_hash() const;
    std::uint64_t relations_hash() const;

    friend Vocab build_vocab(std::span<const RawFact> train,
                             std::span<const RawFact> valid,
                             std::span<const RawFact> test);

  private:
    std::int32_t intern_entity(const std::string& name);
    std::int32_t intern_relation(const std::string& name);

    std::vector<std::string> entities_;
    std::vector<std::string> relations_;
    std::unordered_map<std::string, std::int32_t> entity_ids_;
    std::unordered_map<std::string, std::int32_t> relation_ids_;
    TimeSpan span_{0, 0};
};

// Membership index over every expanded quadruple (all splits), plus the
// grouped views evaluation filtering needs. Immutable once finalized.
class SeenIndex {
  public:
    void insert(const Quadruple& q);
    void finalize();  // sorts the grouped views; call once after inserts
    bool contains(const Quadruple& q) const;
    std::size_t size() const { return quads_.size(); }

    // true tails seen with (h, r, tau) / true heads seen with (t, r, tau);
    // sorted ascending, empty when the group was never observed
    std::span<const std::int32_t> tails_for(std::int32_t h, std::int32_t r,
                                            std::int32_t tau) const;
    std::span<const std::int32_t> heads_for(std::int32_t t, std::int32_t r,
                                            std::int32_t tau) const;

  private:
    struct QuadKey {
        std::int32_t h, r, t, tau;
        bool operator==(const QuadKey&) const = default;
    };
    struct TripleKey {
        std::int32_t e, r, tau;
        bool operator==(const TripleKey&) const = default;
    };
    struct QuadHash {
        std::size_t operator()(const QuadKey& k) const;
    };
    struct TripleHash {
        std::size_t operator()(const TripleKey& k) const;
    };

    std::unordered_set<QuadKey, QuadHash> quads_;
    std::unordered_map<TripleKey, std::vector<std::int32_t>, TripleHash> tails_;
    std::unordered_map<TripleKey, std::vector<std::int32_t>, TripleHash> heads_;
    bool finalized_ = false;
};

// Training fact at interval granularity, for per-epoch time resampling.
// Open sides have already collapsed to the known endpoint (lo == hi).
struct IntervalFact {
    std::int32_t h = 0, r = 0, t = 0;
    std::int32_t lo = 0, hi = 0;
};

struct SplitCounts {
    std::size_t raw = 0;       // structurally valid lines
    std::size_t dropped = 0;   // both-open dates: no timestamp to anchor
    std::size_t expanded = 0;  // quadruples after interval expansion
};

struct Dataset {
    Vocab vocab;
    std::vector<Quadruple> train;
    std::vector<Quadruple> valid;
    std::vector<Quadruple> test;
    std::vector<IntervalFact> train_intervals;  // pre-expansion, for resampling
    SeenIndex seen;
    SplitCounts train_counts, valid_counts, test_counts;
};

// One RawFact per line. Throws DataError naming file and line on short rows,
// empty names, or non-date fields.
std::vector<RawFact> parse_dataset(const std::filesystem::path& path,
                                   DatasetFormat fmt = DatasetFormat::HyTE);

// Ids by first appearance over train, then valid, then test; span covers
// every closed year observed anywhere.
Vocab build_vocab(std::span<const RawFact> train, std::span<const RawFact> valid,
                  std::span<const RawFact> test);

// Closed [s,u]: ceil((u-s+1)/granularity) quadruples, at most `cap`, evenly
// spaced with both endpoints kept. Open on one side: the single known
// endpoint. Open on both: empty.
std::vector<Quadruple> expand_interval(const RawFact& fact, const Vocab& vocab,
                                       int granularity, int cap);

// Corrupt one slot with a uniformly drawn other entity, rejecting corruptions
// that are true facts for a bounded number of retries. Never returns q itself.
Quadruple negative_sample(const Quadruple& q, const Vocab& vocab,
                          CorruptSlot slot, Rng& rng, const SeenIndex& seen,
                          int retries = 32);

// Every entity id except those completing a true fact at the same (r, other
// entity, tau); the ground-truth id of q is always kept.
std::vector<std::int32_t> filtered_candidates(const Quadruple& q,
                                              CorruptSlot slot,
                                              const SeenIndex& seen,
                                              const Vocab& vocab);

// Parses <dir>/train.txt, valid.txt, test.txt, builds the vocabulary, expands
// intervals, and indexes every expanded quadruple.
Dataset load_dataset(const std::filesystem::path& dir, int granularity,
                     int interval_cap, DatasetFormat fmt = DatasetFormat::HyTE);

}  // namespace ptbox
