#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace moew {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Counter-based seed derivation. The result depends only on the master seed and
/// the ordered coordinates, never on the order in which work is scheduled.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> coords) {
    std::uint64_t h = splitmix64(master);
    for (auto c : coords) h = splitmix64(h ^ splitmix64(c + 0x632be59bd9b4e019ULL));
    return h;
}

/// Stage tags used as the last coordinate of derive_seed.
enum class SeedStage : std::uint64_t {
    data = 1,
    embedder = 2,
    noise = 3,
    candidates = 4,
    training = 5,
    baseline = 6,
    subsample = 7,
};

inline std::uint64_t stage(SeedStage s) { return static_cast<std::uint64_t>(s); }

} // namespace moew
