#include "ptbox/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>

#include "ptbox/errors.hpp"

namespace ptbox {

namespace {

std::uint64_t mix64(std::uint64_t z) {  // splitmix64 finalizer
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a_step(std::uint64_t h, unsigned char c) {
    h ^= c;
    h *= 0x100000001b3ull;
    return h;
}

std::uint64_t hash_names(const std::vector<std::string>& names) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& s : names) {
        for (char c : s) h = fnv1a_step(h, static_cast<unsigned char>(c));
        h = fnv1a_step(h, 0xff);  // separator so concatenation can't collide
    }
    return h;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

struct ParsedDate {
    int year = 0;
    bool open = false;
};

// Accepts "[-]YYYY-MM-DD" with "#" wildcards in any component, or a bare
// year. A wildcarded year means the date is open on that side.
bool parse_date(std::string_view field, ParsedDate& out) {
    field = trim(field);
    if (field.empty()) return false;
    bool negative = false;
    if (field.front() == '-') {
        negative = true;
        field.remove_prefix(1);
        if (field.empty()) return false;
    }
    const std::size_t dash = field.find('-');
    const std::string_view year_part =
        dash == std::string_view::npos ? field : field.substr(0, dash);
    if (year_part.empty()) return false;

    bool all_hash = true, all_digit = true;
    for (char c : year_part) {
        if (c != '#') all_hash = false;
        if (!std::isdigit(static_cast<unsigned char>(c))) all_digit = false;
    }
    if (all_hash) {
        out.open = true;
        return true;
    }
    if (!all_digit) return false;
    long y = 0;
    for (char c : year_part) {
        y = y * 10 + (c - '0');
        if (y > std::numeric_limits<int>::max()) return false;
    }
    out.year = negative ? -static_cast<int>(y) : static_cast<int>(y);
    out.open = false;
    return true;
}

[[noreturn]] void line_error(const std::filesystem::path& path, std::size_t line_no,
                             const std::string& what) {
    throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + what);
}

}  // namespace

std::vector<RawFact> parse_dataset(const std::filesystem::path& path,
                                   DatasetFormat /*fmt*/) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset file: " + path.string());

    std::vector<RawFact> facts;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;

        std::string_view rest = line;
        std::string_view field[5];
        for (int i = 0; i < 5; ++i) {
            const std::size_t tab = rest.find('\t');
            if (tab == std::string_view::npos) {
                if (i < 4)
                    line_error(path, line_no, "expected 5 tab-separated fields");
                field[i] = rest;
                rest = {};
            } else {
                field[i] = rest.substr(0, tab);
                rest = rest.substr(tab + 1);
            }
        }

        RawFact f;
        f.head = std::string(trim(field[0]));
        f.relation = std::string(trim(field[1]));
        f.tail = std::string(trim(field[2]));
        if (f.head.empty() || f.relation.empty() || f.tail.empty())
            line_error(path, line_no, "empty head/relation/tail");

        ParsedDate since, until;
        if (!parse_date(field[3], since))
            line_error(path, line_no,
                       "unparseable date '" + std::string(trim(field[3])) + "'");
        if (!parse_date(field[4], until))
            line_error(path, line_no,
                       "unparseable date '" + std::string(trim(field[4])) + "'");
        f.since_open = since.open;
        f.until_open = until.open;
        f.since_year = since.year;
        f.until_year = until.year;
        if (!f.since_open && !f.until_open && f.since_year > f.until_year)
            std::swap(f.since_year, f.until_year);
        facts.push_back(std::move(f));
    }
    return facts;
}

std::int32_t Vocab::intern_entity(const std::string& name) {
    auto [it, fresh] =
        entity_ids_.try_emplace(name, static_cast<std::int32_t>(entities_.size()));
    if (fresh) entities_.push_back(name);
    return it->second;
}

std::int32_t Vocab::intern_relation(const std::string& name) {
    auto [it, fresh] = relation_ids_.try_emplace(
        name, static_cast<std::int32_t>(relations_.size()));
    if (fresh) relations_.push_back(name);
    return it->second;
}

std::int32_t Vocab::entity_id(const std::string& name) const {
    auto it = entity_ids_.find(name);
    if (it == entity_ids_.end())
        throw DataError("unknown entity: " + name);
    return it->second;
}

std::int32_t Vocab::relation_id(const std::string& name) const {
    auto it = relation_ids_.find(name);
    if (it == relation_ids_.end())
        throw DataError("unknown relation: " + name);
    return it->second;
}

const std::string& Vocab::entity_name(std::int32_t id) const {
    return entities_.at(static_cast<std::size_t>(id));
}

const std::string& Vocab::relation_name(std::int32_t id) const {
    return relations_.at(static_cast<std::size_t>(id));
}

std::uint64_t Vocab::entities_hash() const { return hash_names(entities_); }
std::uint64_t Vocab::relations_hash() const { return hash_names(relations_); }

Vocab build_vocab(std::span<const RawFact> train, std::span<const RawFact> valid,
                  std::span<const RawFact> test) {
    Vocab v;
    int lo = std::numeric_limits<int>::max();
    int hi = std::numeric_limits<int>::min();
    for (const auto* split : {&train, &valid, &test}) {
        for (const RawFact& f : *split) {
            v.intern_entity(f.head);
            v.intern_relation(f.relation);
            v.intern_entity(f.tail);
            if (!f.since_open) {
                lo = std::min(lo, f.since_year);
                hi = std::max(hi, f.since_year);
            }
            if (!f.until_open) {
                lo = std::min(lo, f.until_year);
                hi = std::max(hi, f.until_year);
            }
        }
    }
    if (lo > hi) lo = hi = 0;  // no closed date anywhere
    v.span_ = TimeSpan{lo, hi};
    return v;
}

std::vector<Quadruple> expand_interval(const RawFact& fact, const Vocab& vocab,
                                       int granularity, int cap) {
    const std::int32_t h = vocab.entity_id(fact.head);
    const std::int32_t r = vocab.relation_id(fact.relation);
    const std::int32_t t = vocab.entity_id(fact.tail);

    std::vector<Quadruple> out;
    if (fact.since_open && fact.until_open) return out;  // nothing to anchor on
    if (fact.since_open || fact.until_open) {
        const int tau = fact.since_open ? fact.until_year : fact.since_year;
        out.push_back({h, r, t, tau});
        return out;
    }

    const long s = fact.since_year, u = fact.until_year;
    const long span = u - s;
    long m = (span + granularity) / granularity;  // ceil((u-s+1)/granularity)
    if (cap > 0) m = std::min<long>(m, cap);
    if (m <= 1) {
        out.push_back({h, r, t, static_cast<std::int32_t>(s)});
        return out;
    }
    out.reserve(static_cast<std::size_t>(m));
    for (long j = 0; j < m; ++j) {
        // evenly spaced, both endpoints always present
        const long tau =
            s + std::llround(static_cast<double>(j) * static_cast<double>(span) /
                             static_cast<double>(m - 1));
        out.push_back({h, r, t, static_cast<std::int32_t>(tau)});
    }
    return out;
}

std::size_t SeenIndex::QuadHash::operator()(const QuadKey& k) const {
    const std::uint64_t a =
        (static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.h)) << 32) |
        static_cast<std::uint32_t>(k.r);
    const std::uint64_t b =
        (static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.t)) << 32) |
        static_cast<std::uint32_t>(k.tau);
    return static_cast<std::size_t>(mix64(a ^ mix64(b)));
}

std::size_t SeenIndex::TripleHash::operator()(const TripleKey& k) const {
    const std::uint64_t a =
        (static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.e)) << 32) |
        static_cast<std::uint32_t>(k.r);
    return static_cast<std::size_t>(
        mix64(a ^ mix64(static_cast<std::uint32_t>(k.tau))));
}

void SeenIndex::insert(const Quadruple& q) {
    const auto [it, fresh] = quads_.insert(QuadKey{q.h, q.r, q.t, q.tau});
    if (!fresh) return;
    tails_[TripleKey{q.h, q.r, q.tau}].push_back(q.t);
    heads_[TripleKey{q.t, q.r, q.tau}].push_back(q.h);
    finalized_ = false;
}

void SeenIndex::finalize() {
    for (auto& [k, v] : tails_) std::sort(v.begin(), v.end());
    for (auto& [k, v] : heads_) std::sort(v.begin(), v.end());
    finalized_ = true;
}

bool SeenIndex::contains(const Quadruple& q) const {
    return quads_.contains(QuadKey{q.h, q.r, q.t, q.tau});
}

std::span<const std::int32_t> SeenIndex::tails_for(std::int32_t h, std::int32_t r,
                                                   std::int32_t tau) const {
    auto it = tails_.find(TripleKey{h, r, tau});
    if (it == tails_.end()) return {};
    return it->second;
}

std::span<const std::int32_t> SeenIndex::heads_for(std::int32_t t, std::int32_t r,
                                                   std::int32_t tau) const {
    auto it = heads_.find(TripleKey{t, r, tau});
    if (it == heads_.end()) return {};
    return it->second;
}

Quadruple negative_sample(const Quadruple& q, const Vocab& vocab,
                          CorruptSlot slot, Rng& rng, const SeenIndex& seen,
                          int retries) {
    const std::uint64_t num_entities =
        static_cast<std::uint64_t>(vocab.num_entities());
    if (num_entities < 2)
        throw DataError("negative sampling needs at least two entities");

    const std::int32_t orig = slot == CorruptSlot::Tail ? q.t : q.h;
    Quadruple cand = q;
    for (int i = 0; i < retries; ++i) {
        // uniform over all entities except the original
        auto e = static_cast<std::int32_t>(rng.below(num_entities - 1));
        if (e >= orig) ++e;
        (slot == CorruptSlot::Tail ? cand.t : cand.h) = e;
        if (!seen.contains(cand)) return cand;
    }
    return cand;  // bounded retries exhausted: accept the last draw
}

std::vector<std::int32_t> filtered_candidates(const Quadruple& q,
                                              CorruptSlot slot,
                                              const SeenIndex& seen,
                                              const Vocab& vocab) {
    const auto competing = slot == CorruptSlot::Tail
                               ? seen.tails_for(q.h, q.r, q.tau)
                               : seen.heads_for(q.t, q.r, q.tau);
    const std::int32_t truth = slot == CorruptSlot::Tail ? q.t : q.h;
    const std::int32_t n = vocab.num_entities();

    std::vector<std::int32_t> out;
    out.reserve(static_cast<std::size_t>(n));
    for (std::int32_t e = 0; e < n; ++e) {
        if (e != truth &&
            std::binary_search(competing.begin(), competing.end(), e))
            continue;
        out.push_back(e);
    }
    return out;
}

Dataset load_dataset(const std::filesystem::path& dir, int granularity,
                     int interval_cap, DatasetFormat fmt) {
    if (granularity < 1) throw ConfigError("granularity must be >= 1");

    auto train_facts = parse_dataset(dir / "train.txt", fmt);
    auto valid_facts = parse_dataset(dir / "valid.txt", fmt);
    auto test_facts = parse_dataset(dir / "test.txt", fmt);

    Dataset ds;
    ds.vocab = build_vocab(train_facts, valid_facts, test_facts);

    auto expand_split = [&](std::span<const RawFact> facts,
                            std::vector<Quadruple>& quads, SplitCounts& counts,
                            std::vector<IntervalFact>* intervals) {
        counts.raw = facts.size();
        for (const RawFact& f : facts) {
            auto expanded = expand_interval(f, ds.vocab, granularity, interval_cap);
            if (expanded.empty()) {
                ++counts.dropped;
                continue;
            }
            if (intervals) {
                IntervalFact iv;
                iv.h = expanded.front().h;
                iv.r = expanded.front().r;
                iv.t = expanded.front().t;
                iv.lo = expanded.front().tau;
                iv.hi = expanded.back().tau;
                intervals->push_back(iv);
            }
            for (const Quadruple& qd : expanded) {
                quads.push_back(qd);
                ds.seen.insert(qd);
            }
        }
        counts.expanded = quads.size();
    };

    expand_split(train_facts, ds.train, ds.train_counts, &ds.train_intervals);
    expand_split(valid_facts, ds.valid, ds.valid_counts, nullptr);
    expand_split(test_facts, ds.test, ds.test_counts, nullptr);
    ds.seen.finalize();
    return ds;
}

}  // namespace ptbox
