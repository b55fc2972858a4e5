#pragma once

#include <cstdint>
#include <random>

namespace pumpwatch {

// splitmix64: used to derive independent, reproducible sub-seeds from one
// run seed (parameter init, shuffling, dropout, ... each get their own
// stream so reordering one consumer never perturbs the others).
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed;
    for (std::uint64_t i = 0; i <= stream; ++i) splitmix64(s);
    return std::mt19937_64(splitmix64(s));
}

// Named streams so call sites read clearly.
enum RngStream : std::uint64_t {
    kStreamParams = 1,
    kStreamShuffle = 2,
    kStreamDropout = 3,
    kStreamDownsample = 4,
    kStreamSynth = 5,
};

}  // namespace pumpwatch
