#pragma once

// Training objectives in the maximization convention:
//   total = recon - (1 - alpha) * KL(q(z|x) || p(z)) - (alpha + lambda - 1) * D(q(z) || p(z))
// ELBO, beta-VAE, AAE and the unregularized autoencoder are special cases.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include "infovae/divergences.hpp"
#include "infovae/models.hpp"

namespace infovae {

enum class DivergenceKind { none, mmd, stein, adversarial };

inline std::string to_string(DivergenceKind k) {
    switch (k) {
        case DivergenceKind::none: return "none";
        case DivergenceKind::mmd: return "mmd";
        case DivergenceKind::stein: return "stein";
        case DivergenceKind::adversarial: return "adversarial";
    }
    return "?";
}

inline DivergenceKind parse_divergence_kind(const std::string& s) {
    if (s == "none") return DivergenceKind::none;
    if (s == "mmd") return DivergenceKind::mmd;
    if (s == "stein") return DivergenceKind::stein;
    if (s == "adversarial") return DivergenceKind::adversarial;
    throw ConfigError("unknown divergence '" + s + "'");
}

struct ObjectiveSpec {
    double alpha = 0.0;
    double lambda = 1.0;
    DivergenceKind divergence = DivergenceKind::none;
    DecoderKind likelihood = DecoderKind::gaussian;
    double kl_coefficient = 1.0;          // 1 - alpha
    double divergence_coefficient = 0.0;  // alpha + lambda - 1
    /// Set when the spec lies outside alpha < 1, lambda > 0, where the
    /// optimum is not guaranteed to recover the data and true posterior.
    bool warn = false;
    std::string name = "custom";

    static ObjectiveSpec make(double alpha, double lambda, DivergenceKind divergence,
                              DecoderKind likelihood = DecoderKind::gaussian) {
        if (divergence != DivergenceKind::none && !(lambda > 0.0))
            throw ConfigError("ObjectiveSpec: lambda must be > 0 when a divergence is used");
        ObjectiveSpec s;
        s.alpha = alpha;
        s.lambda = lambda;
        s.divergence = divergence;
        s.likelihood = likelihood;
        s.kl_coefficient = 1.0 - alpha;
        s.divergence_coefficient = alpha + lambda - 1.0;
        s.warn = !(alpha < 1.0 && lambda > 0.0);
        return s;
    }
};

/// elbo | beta_vae(b) | aae | infovae_mmd(l) | infovae_stein(l) | unregularized.
inline ObjectiveSpec make_named_objective(std::string_view name,
                                          double param = std::numeric_limits<double>::quiet_NaN(),
                                          DecoderKind likelihood = DecoderKind::gaussian) {
    auto need_positive = [&](const char* what) {
        if (!(param > 0.0)) throw ConfigError(std::string(name) + ": " + what + " must be > 0");
    };
    ObjectiveSpec s;
    if (name == "elbo") {
        s = ObjectiveSpec::make(0.0, 1.0, DivergenceKind::none, likelihood);
    } else if (name == "beta_vae") {
        need_positive("beta");
        s = ObjectiveSpec::make(1.0 - param, param, DivergenceKind::none, likelihood);
    } else if (name == "aae") {
        s = ObjectiveSpec::make(1.0, 1.0, DivergenceKind::adversarial, likelihood);
    } else if (name == "infovae_mmd") {
        need_positive("lambda");
        s = ObjectiveSpec::make(1.0, param, DivergenceKind::mmd, likelihood);
    } else if (name == "infovae_stein") {
        need_positive("lambda");
        s = ObjectiveSpec::make(1.0, param, DivergenceKind::stein, likelihood);
    } else if (name == "unregularized") {
        s = ObjectiveSpec::make(1.0, 1.0, DivergenceKind::none, likelihood);
        s.kl_coefficient = 0.0;
        s.divergence_coefficient = 0.0;
    } else {
        throw ConfigError("unknown objective '" + std::string(name) + "'");
    }
    s.name = std::string(name);
    return s;
}

/// Parses "elbo", "beta_vae(4)", "infovae_mmd(1000)", ...
inline ObjectiveSpec parse_named_objective(const std::string& text, DecoderKind likelihood = DecoderKind::gaussian) {
    const auto open = text.find('(');
    if (open == std::string::npos) return make_named_objective(text, std::numeric_limits<double>::quiet_NaN(), likelihood);
    if (text.back() != ')') throw ConfigError("malformed objective '" + text + "'");
    const std::string inner = text.substr(open + 1, text.size() - open - 2);
    double v = 0.0;
    try {
        std::size_t used = 0;
        v = std::stod(inner, &used);
        if (used != inner.size()) throw ConfigError("");
    } catch (const std::exception&) {
        throw ConfigError("malformed objective parameter in '" + text + "'");
    }
    return make_named_objective(text.substr(0, open), v, likelihood);
}

/// Estimator state for the marginal divergence term.
struct DivergenceState {
    KernelSpec kernel;
    std::optional<Discriminator> discriminator;
};

/// Scalars in nats per sample. `total` follows the maximization convention.
struct LossBreakdown {
    Tensor reconstruction;
    Tensor per_sample_kl;
    Tensor marginal_divergence;
    Tensor total;
    std::optional<Tensor> discriminator_loss;
};

namespace detail {
inline void require_batch_rows(const char* op, const Tensor& batch, const Tensor& other, const char* what) {
    if (other.rank() != 2 || other.rows() != batch.rows())
        throw ShapeError(std::string(op) + ": " + what + " rows " + to_string(other.shape()) + " do not match batch " +
                         to_string(batch.shape()));
}

struct EncodedBatch {
    DiagGaussian q;
    Tensor z;
    Tensor reconstruction;
    Tensor per_sample_kl;
};

inline EncodedBatch encode_and_reconstruct(const char* op, const Tensor& batch, const ModelPair& model, const Tensor& noise) {
    require_cols(op, batch, model.data_dim());
    require_batch_rows(op, batch, noise, "noise");
    require_cols(op, noise, model.latent_dim());
    DiagGaussian q = encode(model, batch);
    Tensor z = rsample(q, noise);
    Tensor recon = mean(decode(model, z).log_prob(batch));
    Tensor kl = mean(kl_diag_gaussian_to_standard(q));
    return {std::move(q), std::move(z), std::move(recon), std::move(kl)};
}
}  // namespace detail

/// One-sample reparameterized ELBO: recon - KL.
inline LossBreakdown elbo_loss(const Tensor& batch, const ModelPair& model, const Tensor& noise) {
    auto e = detail::encode_and_reconstruct("elbo_loss", batch, model, noise);
    Tensor total = e.reconstruction - e.per_sample_kl;
    return {e.reconstruction, e.per_sample_kl, Tensor::scalar(0.0), std::move(total), std::nullopt};
}

/// Reconstruction only; the KL is reported but excluded from `total`.
inline LossBreakdown autoencoder_loss(const Tensor& batch, const ModelPair& model, const Tensor& noise) {
    auto e = detail::encode_and_reconstruct("autoencoder_loss", batch, model, noise);
    return {e.reconstruction, e.per_sample_kl.detached(), Tensor::scalar(0.0), e.reconstruction, std::nullopt};
}

inline LossBreakdown infovae_loss(const Tensor& batch, const ModelPair& model, const Tensor& prior_samples,
                                  const Tensor& noise, const ObjectiveSpec& spec, const DivergenceState& state) {
    auto e = detail::encode_and_reconstruct("infovae_loss", batch, model, noise);
    require_cols("infovae_loss", prior_samples, model.latent_dim());
    if (prior_samples.rows() != batch.rows())
        throw ShapeError("infovae_loss: prior sample count must equal batch size");

    Tensor divergence = Tensor::scalar(0.0);
    std::optional<Tensor> disc_loss;
    switch (spec.divergence) {
        case DivergenceKind::none:
            if (spec.divergence_coefficient != 0.0)
                throw ConfigError("infovae_loss: marginal divergence has coefficient " +
                                  std::to_string(spec.divergence_coefficient) + " but no estimator is selected");
            break;
        case DivergenceKind::mmd: divergence = mmd_vstat(e.z, prior_samples, state.kernel); break;
        case DivergenceKind::stein: {
            const Tensor phi = stein_phi_star(e.z.detached(), standard_normal_score, state.kernel);
            divergence = stein_surrogate_loss(e.z, phi);
            break;
        }
        case DivergenceKind::adversarial: {
            if (!state.discriminator) throw ConfigError("infovae_loss: adversarial divergence needs a discriminator");
            auto adv = adversarial_divergence(e.z, prior_samples, *state.discriminator);
            divergence = adv.gen_loss;
            disc_loss = adv.disc_loss;
            break;
        }
    }
    Tensor total = e.reconstruction;
    if (spec.kl_coefficient != 0.0) total = total - scale(e.per_sample_kl, spec.kl_coefficient);
    if (spec.divergence_coefficient != 0.0) total = total - scale(divergence, spec.divergence_coefficient);
    return {e.reconstruction, e.per_sample_kl, divergence, std::move(total), std::move(disc_loss)};
}

/// Dispatch on the spec: the unregularized autoencoder and ELBO take their
/// dedicated paths, everything else goes through infovae_loss.
inline LossBreakdown objective_loss(const Tensor& batch, const ModelPair& model, const Tensor& prior_samples,
                                    const Tensor& noise, const ObjectiveSpec& spec, const DivergenceState& state) {
    if (spec.kl_coefficient == 0.0 && spec.divergence_coefficient == 0.0) return autoencoder_loss(batch, model, noise);
    return infovae_loss(batch, model, prior_samples, noise, spec, state);
}

/// Reconstruction loss vs. latent divergence magnitude, for choosing lambda so
/// both are of the same order.
struct LossBalance {
    double reconstruction_loss;
    double latent_divergence;
    double ratio;             // reconstruction_loss / latent_divergence
    double suggested_lambda;  // ratio, i.e. lambda making lambda * D ~ reconstruction loss
};

inline LossBalance loss_balance(const LossBreakdown& b) {
    const double x = std::abs(b.reconstruction.item());
    const double d = std::abs(b.marginal_divergence.item());
    const double r = d > 0.0 ? x / d : std::numeric_limits<double>::infinity();
    return {x, d, r, r};
}

}  // namespace infovae
