#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "infovae/autodiff.hpp"
#include "infovae/random.hpp"

namespace infovae {

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2*pi)
inline constexpr double kLogitClamp = 15.0;

/// Diagonal Gaussian, one distribution per row of `mean` / `std`.
struct DiagGaussian {
    Tensor mean;
    Tensor std;

    static DiagGaussian from_std(Tensor mean, Tensor std) {
        if (mean.shape() != std.shape())
            throw ShapeError("DiagGaussian: mean " + to_string(mean.shape()) + " and std " + to_string(std.shape()) +
                             " differ");
        return {std::move(mean), std::move(std)};
    }

    /// std = clamp_floor + softplus(raw). A floor of 0 lets std collapse to 0.
    static DiagGaussian from_softplus(Tensor mean, const Tensor& raw, double clamp_floor) {
        if (clamp_floor < 0.0) throw ConfigError("DiagGaussian: clamp_floor must be >= 0");
        Tensor s = softplus(raw);
        if (clamp_floor > 0.0) s = s + clamp_floor;
        return from_std(std::move(mean), std::move(s));
    }

    static DiagGaussian standard(std::size_t rows, std::size_t dim) {
        return {Tensor::zeros({rows, dim}), Tensor::full({rows, dim}, 1.0)};
    }

    std::size_t dim() const { return mean.cols(); }
    std::size_t rows() const { return mean.rows(); }
    Tensor log_std() const { return log(std); }
};

namespace detail {
inline void require_same(const char* op, const Tensor& a, const Tensor& b) {
    if (a.numel() != b.numel() || a.cols() != b.cols()) shape_mismatch(op, a.shape(), b.shape());
}
}  // namespace detail

/// Per-row log density: sum_i [-0.5 log(2 pi) - log s_i - (x_i - m_i)^2 / (2 s_i^2)].
inline Tensor gaussian_log_prob(const DiagGaussian& g, const Tensor& x) {
    detail::require_same("gaussian_log_prob", g.mean, x);
    const Tensor x2 = x.shape() == g.mean.shape() ? x : x.reshaped(g.mean.shape());
    const Tensor z = (x2 - g.mean) / g.std;
    return row_sum(scale(square(z), -0.5) - log(g.std) - kHalfLog2Pi);
}

/// Per-row standard normal log density.
inline Tensor standard_normal_log_prob(const Tensor& z) {
    return row_sum(scale(square(z), -0.5) - kHalfLog2Pi);
}

/// Reparameterized sample mean + std * noise.
inline Tensor rsample(const DiagGaussian& g, const Tensor& noise) {
    detail::require_same("rsample", g.mean, noise);
    const Tensor n = noise.shape() == g.mean.shape() ? noise : noise.reshaped(g.mean.shape());
    return g.mean + g.std * n;
}

/// Per-row KL(g || N(0, I)) = 0.5 sum_i (m_i^2 + s_i^2 - 1 - 2 log s_i).
inline Tensor kl_diag_gaussian_to_standard(const DiagGaussian& g) {
    return scale(row_sum(square(g.mean) + square(g.std) - scale(log(g.std), 2.0) - 1.0), 0.5);
}

struct BernoulliVector {
    Tensor logits;
    std::size_t dim() const { return logits.cols(); }
};

inline void require_binary(const char* op, const Tensor& x) {
    for (double v : x.values())
        if (v != 0.0 && v != 1.0) throw ConfigError(std::string(op) + ": data must be binary, found " + std::to_string(v));
}

/// Per-row sum_i [x_i log p_i + (1 - x_i) log(1 - p_i)], logits clamped to +-15.
inline Tensor bernoulli_log_prob_logits(const Tensor& logits, const Tensor& x) {
    detail::require_same("bernoulli_log_prob", logits, x);
    require_binary("bernoulli_log_prob", x);
    const Tensor xs = x.shape() == logits.shape() ? x : x.reshaped(logits.shape());
    const Tensor l = clamp(logits, -kLogitClamp, kLogitClamp);
    return row_sum(xs * l - softplus(l));
}

inline Tensor bernoulli_log_prob(const BernoulliVector& b, const Tensor& x) {
    return bernoulli_log_prob_logits(b.logits, x);
}

inline Tensor bernoulli_probs(const BernoulliVector& b) {
    return sigmoid(clamp(b.logits.detached(), -kLogitClamp, kLogitClamp));
}

inline Tensor sample_bernoulli(const Tensor& probs, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> out(probs.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = u(rng) < probs[i] ? 1.0 : 0.0;
    return Tensor(probs.shape(), std::move(out));
}

}  // namespace infovae
