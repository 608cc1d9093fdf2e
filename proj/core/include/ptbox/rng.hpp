#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ptbox {

// Seeded RNG with fully specified value mappings. std::mt19937_64 has a
// standardized output sequence; the distribution helpers below avoid
// std::uniform_*_distribution, whose mappings are implementation-defined,
// so that identical seeds give identical draws on every toolchain.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next() { return eng_(); }

    // Uniform double in [0, 1), 53 random bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Lemire's multiply-shift, bias negligible
    // for the vocabulary sizes involved and fully deterministic.
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(eng_()) * n) >> 64);
    }

    // Derive a subsystem seed from a root seed and a stream tag, so that
    // every consumer of randomness gets an independent, reproducible stream.
    static std::uint64_t derive(std::uint64_t root, std::string_view tag,
                                std::uint64_t a = 0, std::uint64_t b = 0) {
        std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a over the tag
        for (char c : tag) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ull;
        }
        h = mix(h ^ root);
        h = mix(h ^ a);
        h = mix(h ^ b);
        return h;
    }

  private:
    static std::uint64_t mix(std::uint64_t z) {  // splitmix64 finalizer
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::mt19937_64 eng_;
};

}  // namespace ptbox
