#pragma once

#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "ntm/linalg.hpp"

namespace ntm {

using Rng = std::mt19937_64;

inline void fill_uniform(Matrix& m, double lo, double hi, Rng& rng) {
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& x : m.data()) x = dist(rng);
}

inline std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

}  // namespace ntm
