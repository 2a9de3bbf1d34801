#pragma once

#include "flowam/types.hpp"

#include <cstdint>
#include <random>

namespace flowam {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Counter-based stream derivation: stream i of a base seed never depends on how many other
// streams were drawn or on which worker draws it.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    return splitmix64(base ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

inline Vec standard_normal(Rng& rng, int dim) {
    std::normal_distribution<double> n01(0.0, 1.0);
    Vec v(dim);
    for (int i = 0; i < dim; ++i) v(i) = n01(rng);
    return v;
}

}  // namespace flowam
