#include <doctest.h>

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "ptbox/checkpoint.hpp"
#include "ptbox/config.hpp"
#include "ptbox/errors.hpp"
#include "support/tmpdir.hpp"

using namespace ptbox;

namespace {

ModelParams sample_model(bool learn_beta = false) {
    ModelConfig cfg;
    cfg.dim = 3;
    cfg.order_n = 2;
    cfg.beta = 0.25;
    cfg.learn_beta = learn_beta;
    cfg.score_mode = ScoreMode::Head;
    cfg.meet_mode = MeetMode::Hard;
    cfg.evolution_target = EvolutionTarget::Both;
    cfg.time_warp = TimeWarp::Mlp;
    cfg.warp_steepness = 2.5;
    cfg.normalize_time_vec = false;
    Rng rng(41);
    return init_params(5, 2, TimeSpan{1990, 2015}, cfg, rng);
}

std::vector<char> slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& p, const std::vector<char>& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("checkpoint round-trips every tensor and config field") {
    testsupport::TempDir tmp;
    auto m = sample_model();
    auto path = tmp.path() / "model.ptbx";

    CheckpointMeta meta;
    meta.entities_hash = 0xdeadbeefcafef00dull;
    meta.relations_hash = 0x0123456789abcdefull;
    meta.num_entities = 5;
    meta.num_relations = 2;
    meta.extra = "note = round trip\n";
    save_checkpoint(path, m, &meta);

    CheckpointMeta got;
    auto loaded = load_checkpoint(path, &got);

    CHECK(loaded.entities.value == m.entities.value);
    CHECK(loaded.relations.value == m.relations.value);
    CHECK(loaded.time_basis.value == m.time_basis.value);
    CHECK(loaded.num_entities == m.num_entities);
    CHECK(loaded.num_relations == m.num_relations);
    CHECK(loaded.config.dim == m.config.dim);
    CHECK(loaded.config.order_n == m.config.order_n);
    CHECK(loaded.config.beta == m.config.beta);
    CHECK(loaded.config.learn_beta == m.config.learn_beta);
    CHECK(loaded.config.score_mode == m.config.score_mode);
    CHECK(loaded.config.meet_mode == m.config.meet_mode);
    CHECK(loaded.config.evolution_target == m.config.evolution_target);
    CHECK(loaded.config.time_warp == m.config.time_warp);
    CHECK(loaded.config.warp_steepness == m.config.warp_steepness);
    CHECK(loaded.config.normalize_time_vec == m.config.normalize_time_vec);
    CHECK(loaded.codec.span.min_year == 1990);
    CHECK(loaded.codec.span.max_year == 2015);

    CHECK(got.entities_hash == meta.entities_hash);
    CHECK(got.relations_hash == meta.relations_hash);
    CHECK(got.extra.find("note = round trip") != std::string::npos);

    // Identical bytes on re-save: the format is canonical.
    auto path2 = tmp.path() / "again.ptbx";
    save_checkpoint(path2, loaded, &got);
    CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("learned beta survives the round trip") {
    testsupport::TempDir tmp;
    auto m = sample_model(true);
    m.beta_param.value[0] = 0.125;
    auto path = tmp.path() / "b.ptbx";
    save_checkpoint(path, m);
    auto loaded = load_checkpoint(path);
    CHECK(loaded.config.learn_beta);
    CHECK(loaded.beta_param.value[0] == 0.125);
    CHECK(loaded.beta_value() == 0.125);
}

TEST_CASE("checkpoints without a sidecar load with zero hashes") {
    testsupport::TempDir tmp;
    auto m = sample_model();
    auto path = tmp.path() / "bare.ptbx";
    save_checkpoint(path, m);  // no meta: no sidecar written
    CHECK_FALSE(std::filesystem::exists(tmp.path() / "bare.ptbx.meta"));
    CheckpointMeta got;
    (void)load_checkpoint(path, &got);
    CHECK(got.entities_hash == 0);
    CHECK(got.relations_hash == 0);
}

TEST_CASE("corrupted checkpoints are rejected with DataError") {
    testsupport::TempDir tmp;
    auto m = sample_model();
    auto path = tmp.path() / "c.ptbx";
    save_checkpoint(path, m);
    auto bytes = slurp(path);
    REQUIRE(bytes.size() > 64);

    SUBCASE("missing file") {
        CHECK_THROWS_AS((void)load_checkpoint(tmp.path() / "nope.ptbx"), DataError);
    }
    SUBCASE("bad magic") {
        auto bad = bytes;
        bad[0] = 'X';
        spit(path, bad);
        CHECK_THROWS_AS((void)load_checkpoint(path), DataError);
    }
    SUBCASE("unknown version") {
        auto bad = bytes;
        bad[4] = 99;
        spit(path, bad);
        CHECK_THROWS_AS((void)load_checkpoint(path), DataError);
    }
    SUBCASE("truncation") {
        auto bad = bytes;
        bad.resize(bad.size() / 2);
        spit(path, bad);
        CHECK_THROWS_AS((void)load_checkpoint(path), DataError);
    }
    SUBCASE("trailing garbage") {
        auto bad = bytes;
        bad.push_back('\0');
        spit(path, bad);
        CHECK_THROWS_AS((void)load_checkpoint(path), DataError);
    }
}

TEST_CASE("vocab compatibility check compares sidecar hashes") {
    std::vector<RawFact> train = {{"a", "r", "b", 2000, 2001, false, false}};
    auto vocab = build_vocab(train, {}, {});

    CheckpointMeta meta;
    meta.entities_hash = vocab.entities_hash();
    meta.relations_hash = vocab.relations_hash();
    CHECK_NOTHROW(check_vocab_compatible(meta, vocab));

    CheckpointMeta none;  // no sidecar: caller warns, loader passes
    CHECK_NOTHROW(check_vocab_compatible(none, vocab));

    CheckpointMeta wrong;
    wrong.entities_hash = meta.entities_hash + 1;
    wrong.relations_hash = meta.relations_hash;
    CHECK_THROWS_AS(check_vocab_compatible(wrong, vocab), DataError);
}

TEST_CASE("config keys cover every tunable and round-trip canonically") {
    RunConfig cfg;
    auto text = serialize_config(cfg);
    // Serialization parses back to the same canonical form (fixpoint).
    auto reparsed = parse_config_text(text, "test");
    CHECK(serialize_config(reparsed) == text);

    // Every emitted key is accepted by apply_kv.
    std::istringstream lines(text);
    std::string line;
    size_t keys = 0;
    while (std::getline(lines, line)) {
        auto eq = line.find('=');
        REQUIRE(eq != std::string::npos);
        ++keys;
    }
    CHECK(keys >= 30);

    // Sorted order.
    std::istringstream again(text);
    std::string prev, cur;
    while (std::getline(again, cur)) {
        CHECK(prev < cur);
        prev = cur;
    }
}

TEST_CASE("apply_kv parses typed values and rejects junk") {
    RunConfig cfg;
    apply_kv(cfg, "model.dim", "64");
    CHECK(cfg.model.dim == 64);
    apply_kv(cfg, "model.beta", "0.5");
    CHECK(cfg.model.beta == 0.5);
    apply_kv(cfg, "model.score_mode", "head");
    CHECK(cfg.model.score_mode == ScoreMode::Head);
    apply_kv(cfg, "model.meet_mode", "hard");
    CHECK(cfg.model.meet_mode == MeetMode::Hard);
    apply_kv(cfg, "model.evolution", "both");
    CHECK(cfg.model.evolution_target == EvolutionTarget::Both);
    apply_kv(cfg, "model.time_warp", "mlp");
    CHECK(cfg.model.time_warp == TimeWarp::Mlp);
    apply_kv(cfg, "model.learn_beta", "true");
    CHECK(cfg.model.learn_beta);
    apply_kv(cfg, "train.lr", "1e-2");
    CHECK(cfg.train.lr == 1e-2);
    apply_kv(cfg, "train.resample", "false");
    CHECK_FALSE(cfg.train.resample);
    apply_kv(cfg, "eval.setting", "raw");
    CHECK(cfg.eval.setting == EvalSetting::Raw);
    apply_kv(cfg, "eval.task", "relation");
    CHECK(cfg.eval.task == EvalTask::Relation);
    apply_kv(cfg, "eval.split", "valid");
    CHECK(cfg.eval.split == EvalSplit::Valid);
    apply_kv(cfg, "seed", "123");
    CHECK(cfg.seed == 123);
    apply_kv(cfg, "workers", "4");
    CHECK(cfg.workers == 4);
    apply_kv(cfg, "data.dir", "/tmp/data");
    CHECK(cfg.data.dir == "/tmp/data");

    CHECK_THROWS_AS(apply_kv(cfg, "model.dimension", "64"), ConfigError);
    CHECK_THROWS_AS(apply_kv(cfg, "model.dim", "sixty"), ConfigError);
    CHECK_THROWS_AS(apply_kv(cfg, "model.score_mode", "sideways"), ConfigError);
    CHECK_THROWS_AS(apply_kv(cfg, "train.lr", ""), ConfigError);
}

TEST_CASE("config text parsing reports the offending line") {
    const std::string good =
        "# comment\n"
        "model.dim = 8\n"
        "\n"
        "train.epochs = 3\n";
    auto cfg = parse_config_text(good, "inline");
    CHECK(cfg.model.dim == 8);
    CHECK(cfg.train.epochs == 3);

    CHECK_THROWS_WITH_AS((void)parse_config_text("model.dim = 8\nbogus\n", "f"),
                         doctest::Contains("f:2"), ConfigError);
    CHECK_THROWS_WITH_AS(
        (void)parse_config_text("no.such.key = 1\n", "g"),
        doctest::Contains("g:1"), ConfigError);
}

TEST_CASE("load_config reads from disk and propagates into sub-configs") {
    testsupport::TempDir tmp;
    auto path = tmp.path() / "run.cfg";
    {
        std::ofstream out(path);
        out << "seed = 77\n"
               "workers = 2\n"
               "train.lr = 0.05\n"
               "eval.sample_cap = 11\n";
    }
    auto cfg = load_config(path);
    CHECK(cfg.seed == 77);
    auto tc = cfg.train_config();
    CHECK(tc.seed == 77);
    CHECK(tc.workers == 2);
    CHECK(tc.lr == 0.05);
    auto eo = cfg.eval_options();
    CHECK(eo.sample_cap == 11);
    CHECK(eo.workers == 2);

    CHECK_THROWS_AS((void)load_config(tmp.path() / "missing.cfg"), ConfigError);
}

TEST_CASE("serialize_config preserves doubles exactly") {
    RunConfig cfg;
    cfg.model.beta = 0.1 + 0.2;  // not representable prettily
    cfg.train.lr = 1e-300;
    auto text = serialize_config(cfg);
    auto back = parse_config_text(text, "t");
    CHECK(back.model.beta == cfg.model.beta);
    CHECK(back.train.lr == cfg.train.lr);
}
