#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ptbox/evaluator.hpp"
#include "ptbox/model.hpp"
#include "ptbox/trainer.hpp"

namespace ptbox {

struct DataConfig {
    std::string dir;
    int granularity = 1;  // years per expansion step
    int cap = 20;         // max quadruples per interval
};

enum class EvalTask { Link, Relation, Both };
enum class EvalSplit { Train, Valid, Test };

struct EvalConfig {
    EvalSetting setting = EvalSetting::Filtered;
    EvalTask task = EvalTask::Link;
    EvalSplit split = EvalSplit::Test;
    std::size_t sample_cap = 0;
};

// Merged view of every tunable: a flat key=value file with dotted section
// prefixes (data., model., train., eval.) plus root-level seed and workers.
// Unknown keys are rejected so a typo cannot silently fall back to a default.
struct RunConfig {
    DataConfig data;
    ModelConfig model;
    TrainConfig train;
    EvalConfig eval;
    std::uint64_t seed = 42;
    int workers = 1;

    // train section with the root seed / workers pushed in
    TrainConfig train_config() const;
    EvalOptions eval_options() const;
};

// Throws ConfigError on unknown keys or unparseable values. `origin` names
// the source in error messages (file path, "--set", ...).
void apply_kv(RunConfig& cfg, const std::string& key, const std::string& value,
              const std::string& origin = "config");

RunConfig parse_config_text(const std::string& text, const std::string& origin);
RunConfig load_config(const std::filesystem::path& path);

// Canonical form: every key, sorted, shortest round-trip numbers. Two configs
// behave identically iff their serializations are string-equal.
std::string serialize_config(const RunConfig& cfg);

}  // namespace ptbox
