#include "ptbox/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ptbox/errors.hpp"

namespace ptbox {
namespace {

[[noreturn]] void fail(const std::string& origin, const std::string& msg) {
    throw ConfigError(origin + ": " + msg);
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

long long parse_int(const std::string& origin, const std::string& key,
                    const std::string& v) {
    try {
        std::size_t used = 0;
        long long x = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return x;
    } catch (const std::exception&) {
        fail(origin, "key '" + key + "' needs an integer, got '" + v + "'");
    }
}

std::uint64_t parse_u64(const std::string& origin, const std::string& key,
                        const std::string& v) {
    try {
        std::size_t used = 0;
        unsigned long long x = std::stoull(v, &used);
        if (used != v.size() || v.find('-') != std::string::npos)
            throw std::invalid_argument("");
        return static_cast<std::uint64_t>(x);
    } catch (const std::exception&) {
        fail(origin, "key '" + key + "' needs a non-negative integer, got '" + v + "'");
    }
}

double parse_double(const std::string& origin, const std::string& key,
                    const std::string& v) {
    try {
        std::size_t used = 0;
        double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return x;
    } catch (const std::exception&) {
        fail(origin, "key '" + key + "' needs a number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& origin, const std::string& key,
                const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail(origin, "key '" + key + "' needs true/false, got '" + v + "'");
}

// shortest decimal that parses back to the same bits
std::string fmt_double(double x) {
    char buf[40];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, x);
        if (std::strtod(buf, nullptr) == x) return buf;
    }
    return buf;
}

const char* to_str(ScoreMode v) { return v == ScoreMode::Paper ? "paper" : "head"; }
const char* to_str(MeetMode v) { return v == MeetMode::Gumbel ? "gumbel" : "hard"; }
const char* to_str(EvolutionTarget v) {
    switch (v) {
        case EvolutionTarget::Entity: return "entity";
        case EvolutionTarget::Relation: return "relation";
        default: return "both";
    }
}
const char* to_str(TimeWarp v) { return v == TimeWarp::Linear ? "linear" : "mlp"; }
const char* to_str(EvalSetting v) {
    return v == EvalSetting::Filtered ? "filtered" : "raw";
}
const char* to_str(EvalTask v) {
    switch (v) {
        case EvalTask::Link: return "link";
        case EvalTask::Relation: return "relation";
        default: return "both";
    }
}
const char* to_str(EvalSplit v) {
    switch (v) {
        case EvalSplit::Train: return "train";
        case EvalSplit::Valid: return "valid";
        default: return "test";
    }
}

}  // namespace

TrainConfig RunConfig::train_config() const {
    TrainConfig t = train;
    t.seed = seed;
    t.workers = workers;
    return t;
}

EvalOptions RunConfig::eval_options() const {
    EvalOptions o;
    o.setting = eval.setting;
    o.workers = workers;
    o.sample_cap = eval.sample_cap;
    return o;
}

void apply_kv(RunConfig& cfg, const std::string& key, const std::string& value,
              const std::string& origin) {
    auto want = [&](std::initializer_list<const char*> opts) -> std::string {
        std::string all;
        for (const char* o : opts) {
            if (value == o) return value;
            if (!all.empty()) all += "|";
            all += o;
        }
        fail(origin, "key '" + key + "' takes " + all + ", got '" + value + "'");
    };

    if (key == "data.dir") cfg.data.dir = value;
    else if (key == "data.granularity")
        cfg.data.granularity = static_cast<int>(parse_int(origin, key, value));
    else if (key == "data.cap")
        cfg.data.cap = static_cast<int>(parse_int(origin, key, value));
    else if (key == "model.dim")
        cfg.model.dim = static_cast<int>(parse_int(origin, key, value));
    else if (key == "model.order")
        cfg.model.order_n = static_cast<int>(parse_int(origin, key, value));
    else if (key == "model.beta")
        cfg.model.beta = parse_double(origin, key, value);
    else if (key == "model.learn_beta")
        cfg.model.learn_beta = parse_bool(origin, key, value);
    else if (key == "model.score_mode")
        cfg.model.score_mode = want({"paper", "head"}) == "paper"
                                   ? ScoreMode::Paper
                                   : ScoreMode::Head;
    else if (key == "model.meet_mode")
        cfg.model.meet_mode = want({"gumbel", "hard"}) == "gumbel"
                                  ? MeetMode::Gumbel
                                  : MeetMode::Hard;
    else if (key == "model.evolution") {
        const std::string v = want({"entity", "relation", "both"});
        cfg.model.evolution_target = v == "entity"  ? EvolutionTarget::Entity
                                     : v == "relation" ? EvolutionTarget::Relation
                                                       : EvolutionTarget::Both;
    } else if (key == "model.time_warp")
        cfg.model.time_warp =
            want({"linear", "mlp"}) == "linear" ? TimeWarp::Linear : TimeWarp::Mlp;
    else if (key == "model.warp_steepness")
        cfg.model.warp_steepness = parse_double(origin, key, value);
    else if (key == "model.normalize_time")
        cfg.model.normalize_time_vec = parse_bool(origin, key, value);
    else if (key == "model.init_center")
        cfg.model.init_center = parse_double(origin, key, value);
    else if (key == "model.init_width_lo")
        cfg.model.init_width_lo = parse_double(origin, key, value);
    else if (key == "model.init_width_hi")
        cfg.model.init_width_hi = parse_double(origin, key, value);
    else if (key == "model.init_translation")
        cfg.model.init_translation = parse_double(origin, key, value);
    else if (key == "model.init_time")
        cfg.model.init_time = parse_double(origin, key, value);
    else if (key == "train.lr")
        cfg.train.lr = parse_double(origin, key, value);
    else if (key == "train.epochs")
        cfg.train.epochs = static_cast<int>(parse_int(origin, key, value));
    else if (key == "train.batch_size")
        cfg.train.batch_size = static_cast<int>(parse_int(origin, key, value));
    else if (key == "train.neg_ratio")
        cfg.train.neg_ratio = static_cast<int>(parse_int(origin, key, value));
    else if (key == "train.adam_beta1")
        cfg.train.adam_beta1 = parse_double(origin, key, value);
    else if (key == "train.adam_beta2")
        cfg.train.adam_beta2 = parse_double(origin, key, value);
    else if (key == "train.adam_eps")
        cfg.train.adam_eps = parse_double(origin, key, value);
    else if (key == "train.eval_every")
        cfg.train.eval_every = static_cast<int>(parse_int(origin, key, value));
    else if (key == "train.clamp_eps")
        cfg.train.clamp_eps = parse_double(origin, key, value);
    else if (key == "train.l2")
        cfg.train.l2 = parse_double(origin, key, value);
    else if (key == "train.resample")
        cfg.train.resample = parse_bool(origin, key, value);
    else if (key == "train.eval_sample")
        cfg.train.eval_sample =
            static_cast<std::size_t>(parse_u64(origin, key, value));
    else if (key == "train.out_dir")
        cfg.train.out_dir = value;
    else if (key == "eval.setting")
        cfg.eval.setting = want({"filtered", "raw"}) == "filtered"
                               ? EvalSetting::Filtered
                               : EvalSetting::Raw;
    else if (key == "eval.task") {
        const std::string v = want({"link", "relation", "both"});
        cfg.eval.task = v == "link"       ? EvalTask::Link
                        : v == "relation" ? EvalTask::Relation
                                          : EvalTask::Both;
    } else if (key == "eval.split") {
        const std::string v = want({"train", "valid", "test"});
        cfg.eval.split = v == "train"   ? EvalSplit::Train
                         : v == "valid" ? EvalSplit::Valid
                                        : EvalSplit::Test;
    } else if (key == "eval.sample_cap")
        cfg.eval.sample_cap =
            static_cast<std::size_t>(parse_u64(origin, key, value));
    else if (key == "seed")
        cfg.seed = parse_u64(origin, key, value);
    else if (key == "workers")
        cfg.workers = static_cast<int>(parse_int(origin, key, value));
    else
        fail(origin, "unknown key '" + key + "'");
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string where = origin + ":" + std::to_string(lineno);
        if (eq == std::string::npos) fail(where, "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail(where, "empty key");
        apply_kv(cfg, key, value, where);
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path.string());
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_config_text(buf.str(), path.string());
}

std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream os;
    os << "data.cap = " << cfg.data.cap << "\n";
    os << "data.dir = " << cfg.data.dir << "\n";
    os << "data.granularity = " << cfg.data.granularity << "\n";
    os << "eval.sample_cap = " << cfg.eval.sample_cap << "\n";
    os << "eval.setting = " << to_str(cfg.eval.setting) << "\n";
    os << "eval.split = " << to_str(cfg.eval.split) << "\n";
    os << "eval.task = " << to_str(cfg.eval.task) << "\n";
    os << "model.beta = " << fmt_double(cfg.model.beta) << "\n";
    os << "model.dim = " << cfg.model.dim << "\n";
    os << "model.evolution = " << to_str(cfg.model.evolution_target) << "\n";
    os << "model.init_center = " << fmt_double(cfg.model.init_center) << "\n";
    os << "model.init_time = " << fmt_double(cfg.model.init_time) << "\n";
    os << "model.init_translation = " << fmt_double(cfg.model.init_translation)
       << "\n";
    os << "model.init_width_hi = " << fmt_double(cfg.model.init_width_hi) << "\n";
    os << "model.init_width_lo = " << fmt_double(cfg.model.init_width_lo) << "\n";
    os << "model.learn_beta = " << (cfg.model.learn_beta ? "true" : "false")
       << "\n";
    os << "model.meet_mode = " << to_str(cfg.model.meet_mode) << "\n";
    os << "model.normalize_time = "
       << (cfg.model.normalize_time_vec ? "true" : "false") << "\n";
    os << "model.order = " << cfg.model.order_n << "\n";
    os << "model.score_mode = " << to_str(cfg.model.score_mode) << "\n";
    os << "model.time_warp = " << to_str(cfg.model.time_warp) << "\n";
    os << "model.warp_steepness = " << fmt_double(cfg.model.warp_steepness)
       << "\n";
    os << "seed = " << cfg.seed << "\n";
    os << "train.adam_beta1 = " << fmt_double(cfg.train.adam_beta1) << "\n";
    os << "train.adam_beta2 = " << fmt_double(cfg.train.adam_beta2) << "\n";
    os << "train.adam_eps = " << fmt_double(cfg.train.adam_eps) << "\n";
    os << "train.batch_size = " << cfg.train.batch_size << "\n";
    os << "train.clamp_eps = " << fmt_double(cfg.train.clamp_eps) << "\n";
    os << "train.epochs = " << cfg.train.epochs << "\n";
    os << "train.eval_every = " << cfg.train.eval_every << "\n";
    os << "train.eval_sample = " << cfg.train.eval_sample << "\n";
    os << "train.l2 = " << fmt_double(cfg.train.l2) << "\n";
    os << "train.lr = " << fmt_double(cfg.train.lr) << "\n";
    os << "train.neg_ratio = " << cfg.train.neg_ratio << "\n";
    os << "train.out_dir = " << cfg.train.out_dir.string() << "\n";
    os << "train.resample = " << (cfg.train.resample ? "true" : "false") << "\n";
    os << "workers = " << cfg.workers << "\n";
    return os.str();
}

}  // namespace ptbox
