#pragma once

#include <cstdint>
#include <random>

namespace xsdr {

// splitmix64 finalizer, used to decorrelate (seed, stream) pairs.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Independent substream for worker `id` of a root seed. Substreams are what
// make parallel loops (projections, permutations, reps) order-independent.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t id) {
    return std::mt19937_64(mix64(mix64(seed) ^ mix64(id + 0x51ed270b7a4fc1e5ULL)));
}

}  // namespace xsdr
