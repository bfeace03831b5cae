#pragma once

#include <cstdint>
#include <random>

namespace invset {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of an independent stream identified by (seed, tags...). Streams do not
/// depend on the order in which they are created, so work split across
/// threads draws the same numbers as a serial run.
template <typename... Tags>
std::uint64_t stream_seed(std::uint64_t seed, Tags... tags) {
    std::uint64_t s = mix64(seed);
    ((s = mix64(s ^ mix64(static_cast<std::uint64_t>(tags) + 0x632be59bd9b4e019ULL))), ...);
    return s;
}

template <typename... Tags>
Rng make_rng(std::uint64_t seed, Tags... tags) {
    return Rng(stream_seed(seed, tags...));
}

// Stream tags.
enum class Stream : std::uint64_t {
    data = 1,
    bootstrap = 2,
    coefficients = 3,
    retry = 4,
    subsample = 5,
};

}  // namespace invset
