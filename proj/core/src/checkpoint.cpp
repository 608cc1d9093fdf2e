#include "ptbox/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ptbox/errors.hpp"

namespace ptbox {
namespace {

constexpr std::array<char, 4> kMagic = {'P', 'T', 'B', 'X'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint16_t kFlagLearnBeta = 1u << 0;

template <typename T>
void put(std::ostream& os, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
    } else {
        os.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& path) {
    std::array<unsigned char, sizeof(T)> bytes;
    if (!is.read(reinterpret_cast<char*>(bytes.data()), sizeof(T)))
        throw DataError("truncated checkpoint: " + path.string());
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
}

void put_section(std::ostream& os, const char tag[4], const std::vector<double>& v) {
    os.write(tag, 4);
    put<std::uint64_t>(os, v.size());
    for (double x : v) put(os, x);
}

std::vector<double> get_section(std::istream& is, const char tag[4],
                                std::size_t expect, const std::filesystem::path& path) {
    char got[4];
    if (!is.read(got, 4)) throw DataError("truncated checkpoint: " + path.string());
    if (std::memcmp(got, tag, 4) != 0)
        throw DataError("checkpoint section out of order in " + path.string() +
                        ": expected " + std::string(tag, 4));
    auto n = get<std::uint64_t>(is, path);
    if (n != expect)
        throw DataError("checkpoint section " + std::string(tag, 4) + " in " +
                        path.string() + " holds " + std::to_string(n) +
                        " values, expected " + std::to_string(expect));
    std::vector<double> v(n);
    for (auto& x : v) x = get<double>(is, path);
    return v;
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
    auto p = path;
    p += ".meta";
    return p;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& m,
                     const CheckpointMeta* meta) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write checkpoint: " + path.string());

    const auto& cfg = m.config;
    os.write(kMagic.data(), 4);
    put(os, kVersion);
    put<std::uint16_t>(os, cfg.learn_beta ? kFlagLearnBeta : 0);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(m.num_entities));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(m.num_relations));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(m.codec.num_basis()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.dim));
    put<std::uint8_t>(os, static_cast<std::uint8_t>(cfg.score_mode));
    put<std::uint8_t>(os, static_cast<std::uint8_t>(cfg.meet_mode));
    put<std::uint8_t>(os, static_cast<std::uint8_t>(cfg.evolution_target));
    put<std::uint8_t>(os, static_cast<std::uint8_t>(cfg.time_warp));
    put<std::uint8_t>(os, cfg.normalize_time_vec ? 1 : 0);
    put<std::uint8_t>(os, 0);
    put<std::uint8_t>(os, 0);
    put<std::uint8_t>(os, 0);
    put(os, cfg.beta);
    put(os, cfg.warp_steepness);
    put<std::int32_t>(os, m.codec.span.min_year);
    put<std::int32_t>(os, m.codec.span.max_year);

    put_section(os, "ENT ", m.entities.value);
    put_section(os, "REL ", m.relations.value);
    put_section(os, "TIME", m.time_basis.value);
    if (cfg.learn_beta) put_section(os, "BETA", m.beta_param.value);
    os.flush();
    if (!os) throw DataError("write failed for checkpoint: " + path.string());

    if (meta) {
        std::ofstream ms(sidecar_path(path), std::ios::trunc);
        if (!ms) throw DataError("cannot write sidecar: " + sidecar_path(path).string());
        char buf[32];
        std::snprintf(buf, sizeof buf, "%016llx",
                      static_cast<unsigned long long>(meta->entities_hash));
        ms << "entities_hash=" << buf << "\n";
        std::snprintf(buf, sizeof buf, "%016llx",
                      static_cast<unsigned long long>(meta->relations_hash));
        ms << "relations_hash=" << buf << "\n";
        ms << "num_entities=" << meta->num_entities << "\n";
        ms << "num_relations=" << meta->num_relations << "\n";
        if (!meta->extra.empty()) {
            ms << meta->extra;
            if (meta->extra.back() != '\n') ms << "\n";
        }
    }
}

ModelParams load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open checkpoint: " + path.string());

    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic.data(), 4) != 0)
        throw DataError("not a checkpoint file: " + path.string());
    auto version = get<std::uint16_t>(is, path);
    if (version != kVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version) +
                        " in " + path.string());
    auto flags = get<std::uint16_t>(is, path);

    auto num_entities = get<std::uint32_t>(is, path);
    auto num_relations = get<std::uint32_t>(is, path);
    auto num_basis = get<std::uint32_t>(is, path);
    auto dim = get<std::uint32_t>(is, path);
    if (num_basis < 1 || dim < 1)
        throw DataError("corrupt shape fields in checkpoint: " + path.string());

    ModelConfig cfg;
    cfg.dim = static_cast<int>(dim);
    cfg.order_n = static_cast<int>(num_basis) - 1;
    auto read_enum = [&](auto max_value) {
        auto v = get<std::uint8_t>(is, path);
        if (v > static_cast<std::uint8_t>(max_value))
            throw DataError("corrupt enum field in checkpoint: " + path.string());
        return v;
    };
    cfg.score_mode = static_cast<ScoreMode>(read_enum(ScoreMode::Head));
    cfg.meet_mode = static_cast<MeetMode>(read_enum(MeetMode::Gumbel));
    cfg.evolution_target = static_cast<EvolutionTarget>(read_enum(EvolutionTarget::Both));
    cfg.time_warp = static_cast<TimeWarp>(read_enum(TimeWarp::Mlp));
    cfg.normalize_time_vec = get<std::uint8_t>(is, path) != 0;
    get<std::uint8_t>(is, path);
    get<std::uint8_t>(is, path);
    get<std::uint8_t>(is, path);
    cfg.beta = get<double>(is, path);
    cfg.warp_steepness = get<double>(is, path);
    cfg.learn_beta = (flags & kFlagLearnBeta) != 0;

    TimeSpan span;
    span.min_year = get<std::int32_t>(is, path);
    span.max_year = get<std::int32_t>(is, path);

    ModelParams m;
    m.config = cfg;
    m.codec = TimeCodec{cfg.order_n, span, cfg.time_warp, cfg.warp_steepness};
    m.num_entities = static_cast<std::int32_t>(num_entities);
    m.num_relations = static_cast<std::int32_t>(num_relations);
    const auto d = static_cast<std::size_t>(dim);
    m.entities = Param("entities", 2 * num_entities * d);
    m.relations = Param("relations", 2 * num_relations * d);
    m.time_basis = Param("time_basis", num_basis * d);
    m.beta_param = Param("beta", 1);
    m.beta_param.value[0] = cfg.beta;
    m.entities.value = get_section(is, "ENT ", 2 * num_entities * d, path);
    m.relations.value = get_section(is, "REL ", 2 * num_relations * d, path);
    m.time_basis.value = get_section(is, "TIME", num_basis * d, path);
    if (cfg.learn_beta) m.beta_param.value = get_section(is, "BETA", 1, path);

    is.peek();
    if (!is.eof())
        throw DataError("trailing bytes after checkpoint data: " + path.string());

    if (meta) {
        *meta = CheckpointMeta{};
        std::ifstream ms(sidecar_path(path));
        std::string line;
        std::ostringstream extra;
        while (ms && std::getline(ms, line)) {
            auto eq = line.find('=');
            auto key = eq == std::string::npos ? line : line.substr(0, eq);
            auto val = eq == std::string::npos ? std::string() : line.substr(eq + 1);
            if (key == "entities_hash")
                meta->entities_hash = std::stoull(val, nullptr, 16);
            else if (key == "relations_hash")
                meta->relations_hash = std::stoull(val, nullptr, 16);
            else if (key == "num_entities")
                meta->num_entities = static_cast<std::uint32_t>(std::stoul(val));
            else if (key == "num_relations")
                meta->num_relations = static_cast<std::uint32_t>(std::stoul(val));
            else
                extra << line << "\n";
        }
        meta->extra = extra.str();
    }
    return m;
}

void check_vocab_compatible(const CheckpointMeta& meta, const Vocab& vocab) {
    if (meta.entities_hash == 0 && meta.relations_hash == 0) return;  // no sidecar
    if (meta.entities_hash != vocab.entities_hash() ||
        meta.relations_hash != vocab.relations_hash())
        throw DataError("checkpoint was trained on a different vocabulary "
                        "(sidecar hash mismatch)");
}

}  // namespace ptbox
