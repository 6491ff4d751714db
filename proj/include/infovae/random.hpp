#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "infovae/autodiff.hpp"

namespace infovae {

using Rng = std::mt19937_64;

/// Independent stream derived from a master seed and a stream label.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Rng(seq);
}

inline Tensor standard_normal(Rng& rng, std::size_t rows, std::size_t cols) {
    std::normal_distribution<double> n01(0.0, 1.0);
    std::vector<double> v(rows * cols);
    for (auto& x : v) x = n01(rng);
    return Tensor::matrix(rows, cols, std::move(v));
}

inline Tensor uniform(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(rows * cols);
    for (auto& x : v) x = u(rng);
    return Tensor::matrix(rows, cols, std::move(v));
}

}  // namespace infovae
