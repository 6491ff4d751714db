#pragma once

// Shared fixtures for the unit tests and the acceptance runner.

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "infovae/infovae.hpp"

namespace infovae::testing {

/// p(z) = N(0, 1), p(x|z) = N(a z, s^2), q(z|x) = N(m x, v) in one dimension.
/// Evidence, posterior and the variational gap are all closed-form.
struct LinearGaussianModel {
    double a = 1.5, s = 0.5, m = 0.6, v = 0.2;

    std::size_t data_dim() const { return 1; }
    std::size_t latent_dim() const { return 1; }

    Tensor sample_prior(std::size_t n, Rng& rng) const { return standard_normal(rng, n, 1); }
    Tensor log_prior(const Tensor& z) const { return standard_normal_log_prob(z); }
    Tensor sample_posterior(const Tensor& x, Rng& rng) const {
        const Tensor e = standard_normal(rng, x.rows(), 1);
        std::vector<double> out(x.rows());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = m * x[i] + std::sqrt(v) * e[i];
        return Tensor::matrix(x.rows(), 1, std::move(out));
    }
    Tensor log_posterior(const Tensor& z, const Tensor& x) const {
        std::vector<double> out(z.rows());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = normal_log_pdf(z[i], m * x[i], v);
        return Tensor::matrix(z.rows(), 1, std::move(out));
    }
    Tensor log_posterior_matrix(const Tensor& z, const Tensor& x) const {
        std::vector<double> out(z.rows() * x.rows());
        for (std::size_t i = 0; i < z.rows(); ++i)
            for (std::size_t j = 0; j < x.rows(); ++j) out[i * x.rows() + j] = normal_log_pdf(z[i], m * x[j], v);
        return Tensor::matrix(z.rows(), x.rows(), std::move(out));
    }
    Tensor kl_to_prior(const Tensor& x) const {
        std::vector<double> out(x.rows());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * (m * m * x[i] * x[i] + v - 1.0 - std::log(v));
        return Tensor::matrix(x.rows(), 1, std::move(out));
    }
    Tensor sample_likelihood(const Tensor& z, Rng& rng) const {
        const Tensor e = standard_normal(rng, z.rows(), 1);
        std::vector<double> out(z.rows());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * z[i] + s * e[i];
        return Tensor::matrix(z.rows(), 1, std::move(out));
    }
    Tensor log_likelihood(const Tensor& x, const Tensor& z) const {
        std::vector<double> out(x.rows());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = normal_log_pdf(x[i], a * z[i], s * s);
        return Tensor::matrix(x.rows(), 1, std::move(out));
    }

    double log_evidence(double x) const { return normal_log_pdf(x, 0.0, a * a + s * s); }
    double posterior_mean(double x) const { return a * x / (a * a + s * s); }
    double posterior_var() const { return s * s / (a * a + s * s); }
    /// KL(q(z|x) || p(z|x)).
    double gap(double x) const {
        const double pm = posterior_mean(x), pv = posterior_var(), qm = m * x;
        return 0.5 * (std::log(pv / v) + (v + (qm - pm) * (qm - pm)) / pv - 1.0);
    }

    static double normal_log_pdf(double x, double mean, double var) {
        return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * (x - mean) * (x - mean) / var;
    }
};

inline ModelPair small_model(DecoderKind kind, std::size_t data_dim, std::size_t latent_dim, std::uint64_t seed,
                             std::vector<std::size_t> hidden = {2}) {
    ModelConfig c;
    c.data_dim = data_dim;
    c.latent_dim = latent_dim;
    c.encoder_hidden = hidden;
    c.decoder_hidden = hidden;
    c.decoder = kind;
    c.clamp_floor = 0.0;
    return ModelPair::create(c, seed);
}

/// Worst relative error of the analytic gradient of `loss(model)` over every
/// parameter tensor of the model, each checked with the others held fixed.
inline double model_grad_check(const ModelPair& model, const std::function<Tensor(const ModelPair&)>& loss,
                               double step = 1e-5) {
    double worst = 0.0;
    const std::size_t count = ModelPair(model).parameters().size();
    for (std::size_t k = 0; k < count; ++k) {
        ModelPair base = model;
        const Tensor original = *base.parameters()[k];
        auto f = [&](const Tensor& t) {
            ModelPair m = model;
            *m.parameters()[k] = t;
            return loss(m);
        };
        worst = std::max(worst, grad_check(f, original, step));
    }
    return worst;
}

/// Random joint whose encoder is (1 - eps) times the exact posterior plus eps
/// times a random table, so importance weights have bounded spread.
inline tabular::TabularJoint near_posterior_joint(std::uint64_t seed, std::size_t nx, std::size_t nz, double eps = 0.1) {
    Rng rng = make_rng(seed, 1);
    tabular::TabularJoint j = tabular::random_joint(nx, nz, rng);
    const auto post = j.p_z_given_x();
    for (std::size_t i = 0; i < post.size(); ++i) j.q_z_given_x[i] = (1.0 - eps) * post[i] + eps * j.q_z_given_x[i];
    return j;
}

struct GradCheckCase {
    std::string name;
    ObjectiveSpec spec;
    DecoderKind decoder;
};

/// Every objective family on every likelihood it is used with.
inline std::vector<GradCheckCase> grad_check_cases() {
    std::vector<GradCheckCase> out;
    for (DecoderKind d : {DecoderKind::gaussian, DecoderKind::bernoulli, DecoderKind::autoregressive}) {
        const std::string tag = to_string(d);
        out.push_back({"elbo/" + tag, make_named_objective("elbo", std::nan(""), d), d});
        out.push_back({"beta_vae/" + tag, make_named_objective("beta_vae", 4.0, d), d});
        out.push_back({"unregularized/" + tag, make_named_objective("unregularized", std::nan(""), d), d});
        out.push_back({"infovae_mmd/" + tag, make_named_objective("infovae_mmd", 10.0, d), d});
        out.push_back({"infovae_stein/" + tag, make_named_objective("infovae_stein", 10.0, d), d});
        out.push_back({"aae/" + tag, make_named_objective("aae", std::nan(""), d), d});
        out.push_back({"custom_mmd/" + tag, ObjectiveSpec::make(0.5, 2.0, DivergenceKind::mmd, d), d});
    }
    return out;
}

/// Gradient check of the negated objective on a 2-2-2 model. Stein's
/// direction is held fixed at the base point, as the trainer does.
inline double objective_grad_check(const GradCheckCase& c, std::uint64_t seed = 1) {
    const bool binary = c.decoder != DecoderKind::gaussian;
    const ModelPair model = small_model(c.decoder, 2, 2, seed);
    Rng rng = make_rng(seed, 99);
    Tensor batch = binary ? Tensor::matrix(4, 2, {0, 1, 1, 0, 1, 1, 0, 0}) : standard_normal(rng, 4, 2);
    const Tensor noise = standard_normal(rng, 4, 2);
    const Tensor prior = standard_normal(rng, 4, 2);
    DivergenceState state;
    state.kernel = default_kernel(2);
    if (c.spec.divergence == DivergenceKind::adversarial) state.discriminator = Discriminator::create(2, rng, 4);

    if (c.spec.divergence == DivergenceKind::stein) {
        const Tensor z0 = rsample(encode(model, batch), noise);
        const Tensor phi = stein_phi_star(z0, standard_normal_score, state.kernel);
        return model_grad_check(model, [&](const ModelPair& m) {
            const DiagGaussian q = encode(m, batch);
            const Tensor z = rsample(q, noise);
            const Tensor recon = mean(decode(m, z).log_prob(batch));
            const Tensor kl = mean(kl_diag_gaussian_to_standard(q));
            return -(recon - scale(kl, c.spec.kl_coefficient) -
                     scale(stein_surrogate_loss(z, phi), c.spec.divergence_coefficient));
        });
    }
    return model_grad_check(model, [&](const ModelPair& m) {
        return -objective_loss(batch, m, prior, noise, c.spec, state).total;
    });
}

}  // namespace infovae::testing
