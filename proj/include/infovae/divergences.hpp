#pragma once

// Sample-based estimators of D(q(z) || p(z)): kernel MMD, the Stein
// variational direction with its surrogate loss, and an adversarial
// discriminator.

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "infovae/autodiff.hpp"
#include "infovae/nn.hpp"
#include "infovae/random.hpp"

namespace infovae {

/// Sum of RBF kernels k(a, b) = sum_h exp(-|a - b|^2 / (2 h^2)).
struct KernelSpec {
    std::vector<double> bandwidths{1.0};

    void validate() const {
        if (bandwidths.empty()) throw ConfigError("KernelSpec: at least one bandwidth is required");
        for (double h : bandwidths)
            if (!(h > 0.0)) throw ConfigError("KernelSpec: bandwidths must be > 0");
    }

    double operator()(std::span<const double> a, std::span<const double> b) const {
        double d2 = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
        double k = 0.0;
        for (double h : bandwidths) k += std::exp(-d2 / (2.0 * h * h));
        return k;
    }
};

/// Bandwidths {0.1, 0.5, 1, 2, 10}, each multiplied by sqrt(latent_dim).
inline KernelSpec default_kernel(std::size_t latent_dim) {
    const double s = std::sqrt(static_cast<double>(latent_dim));
    KernelSpec k;
    k.bandwidths = {0.1 * s, 0.5 * s, 1.0 * s, 2.0 * s, 10.0 * s};
    return k;
}

inline Tensor kernel_matrix(const Tensor& a, const Tensor& b, const KernelSpec& k) {
    k.validate();
    const Tensor d2 = pairwise_sq_dist(a, b);
    Tensor out = exp(scale(d2, -1.0 / (2.0 * k.bandwidths[0] * k.bandwidths[0])));
    for (std::size_t i = 1; i < k.bandwidths.size(); ++i)
        out = out + exp(scale(d2, -1.0 / (2.0 * k.bandwidths[i] * k.bandwidths[i])));
    return out;
}

/// Biased V-statistic mean(K_pp) - 2 mean(K_qp) + mean(K_qq), self-pairs kept.
inline Tensor mmd_vstat(const Tensor& zq, const Tensor& zp, const KernelSpec& k) {
    if (zq.rank() != 2 || zp.rank() != 2) throw ShapeError("mmd_vstat: sample sets must be matrices");
    if (zq.shape()[1] != zp.shape()[1]) detail::shape_mismatch("mmd_vstat", zq.shape(), zp.shape());
    return mean(kernel_matrix(zp, zp, k)) - scale(mean(kernel_matrix(zq, zp, k)), 2.0) + mean(kernel_matrix(zq, zq, k));
}

using ScoreFunction = std::function<std::vector<double>(std::span<const double>)>;

inline std::vector<double> standard_normal_score(std::span<const double> z) {
    std::vector<double> s(z.begin(), z.end());
    for (auto& v : s) v = -v;
    return s;
}

struct SteinConfig {
    KernelSpec kernel;
    double step_size = 0.05;

    void validate() const {
        kernel.validate();
        if (!(step_size > 0.0)) throw ConfigError("SteinConfig: step_size must be > 0");
    }
};

/// phi*(z_i) = (1/n) sum_j [k(z_j, z_i) grad log p(z_j) + grad_{z_j} k(z_j, z_i)],
/// self-pairs included. Returns a constant [n, d] matrix.
inline Tensor stein_phi_star(const Tensor& particles, const ScoreFunction& score_of_p, const KernelSpec& k) {
    if (particles.rank() != 2) throw ShapeError("stein_phi_star: particles must be a matrix");
    k.validate();
    const std::size_t n = particles.shape()[0], d = particles.shape()[1];
    auto z = particles.values();
    std::vector<double> scores(n * d);
    for (std::size_t j = 0; j < n; ++j) {
        const auto s = score_of_p(z.subspan(j * d, d));
        if (s.size() != d) throw ShapeError("stein_phi_star: score has wrong dimension");
        for (std::size_t c = 0; c < d; ++c) {
            if (!std::isfinite(s[c])) throw NumericError("stein_phi_star: non-finite score");
            scores[j * d + c] = s[c];
        }
    }
    std::vector<double> phi(n * d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double d2 = 0.0;
            for (std::size_t c = 0; c < d; ++c) d2 += (z[j * d + c] - z[i * d + c]) * (z[j * d + c] - z[i * d + c]);
            for (double h : k.bandwidths) {
                const double inv_h2 = 1.0 / (h * h);
                const double kij = std::exp(-0.5 * d2 * inv_h2);
                for (std::size_t c = 0; c < d; ++c)
                    phi[i * d + c] += kij * scores[j * d + c] - kij * inv_h2 * (z[j * d + c] - z[i * d + c]);
            }
        }
        for (std::size_t c = 0; c < d; ++c) phi[i * d + c] /= static_cast<double>(n);
    }
    return Tensor::matrix(n, d, std::move(phi));
}

/// mean_i <z_i, -phi_i>; its gradient w.r.t. z_i is -phi_i / n, so a descent
/// step moves particles along +phi.
inline Tensor stein_surrogate_loss(const Tensor& particles, const Tensor& phi) {
    if (particles.shape() != phi.shape()) detail::shape_mismatch("stein_surrogate_loss", particles.shape(), phi.shape());
    const double n = static_cast<double>(particles.rows());
    return scale(sum(particles * phi.detached()), -1.0 / n);
}

/// Latent -> logit classifier, 2 hidden tanh layers.
struct Discriminator {
    Mlp net;

    static Discriminator create(std::size_t latent_dim, Rng& rng, std::size_t hidden = 64) {
        return {Mlp::create(latent_dim, {hidden, hidden}, 1, rng)};
    }

    /// Clamped logits, one per row.
    Tensor logits(const Tensor& z) const {
        return clamp(net.forward(z), -kDiscriminatorLogitClamp, kDiscriminatorLogitClamp).reshaped({z.rows()});
    }

    std::vector<Tensor*> parameters() { return net.parameters(); }
    std::vector<std::string> parameter_names() const { return net.parameter_names("discriminator"); }

    static constexpr double kDiscriminatorLogitClamp = 15.0;
};

struct AdversarialLosses {
    Tensor disc_loss;  // differentiable w.r.t. discriminator parameters only
    Tensor gen_loss;   // differentiable w.r.t. z_q only
};

/// disc_loss = 0.5 [BCE(D(z_p), 1) + BCE(D(z_q), 0)], gen_loss = BCE(D(z_q), 1).
inline AdversarialLosses adversarial_divergence(const Tensor& zq, const Tensor& zp, const Discriminator& d) {
    if (zq.rank() != 2 || zp.rank() != 2 || zq.shape()[1] != zp.shape()[1])
        detail::shape_mismatch("adversarial_divergence", zq.shape(), zp.shape());
    const Tensor lp = d.logits(zp.detached());
    const Tensor lq = d.logits(zq.detached());
    Tensor disc = scale(mean(softplus(-lp)) + mean(softplus(lq)), 0.5);
    const Discriminator frozen = detach(d);
    Tensor gen = mean(softplus(-frozen.logits(zq)));
    return {std::move(disc), std::move(gen)};
}

inline double discriminator_accuracy(const Discriminator& d, const Tensor& zq, const Tensor& zp) {
    const Tensor lp = d.logits(zp.detached());
    const Tensor lq = d.logits(zq.detached());
    std::size_t correct = 0;
    for (double v : lp.values()) correct += v > 0.0;
    for (double v : lq.values()) correct += v <= 0.0;
    return static_cast<double>(correct) / static_cast<double>(lp.numel() + lq.numel());
}

/// One Adam step on the discriminator loss.
inline double train_discriminator_step(Discriminator& d, TrainState& state, const Tensor& zq, const Tensor& zp) {
    Tape tape;
    Discriminator bound = attach(d, tape);
    const Tensor loss = adversarial_divergence(zq, zp, bound).disc_loss;
    const auto grads = tape.backward(loss);
    std::vector<Tensor> g;
    for (Tensor* p : bound.parameters()) g.push_back(grads.of(*p));
    adam_step(state, d.parameters(), g, d.parameter_names());
    return loss.item();
}

}  // namespace infovae
