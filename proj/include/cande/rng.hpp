#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cande::rng {

/// SplitMix64 step; used to decorrelate derived seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Fixed seed-splitting rule: one global seed expands to independent
/// per-stage seeds, so pipeline stages are individually reproducible.
inline std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stage) {
    return splitmix64(global_seed ^ fnv1a64(stage));
}

inline std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stage,
                                 std::uint64_t index) {
    return splitmix64(derive_seed(global_seed, stage) ^ splitmix64(index + 1));
}

inline std::mt19937_64 make_engine(std::uint64_t seed) { return std::mt19937_64(seed); }

}  // namespace cande::rng
