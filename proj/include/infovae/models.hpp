#pragma once

// Encoder/decoder pair. The encoder is a tanh MLP producing the mean and the
// softplus-mapped scale of q(z|x). Decoders: diagonal Gaussian, factorized
// Bernoulli, or a masked autoregressive (MADE-style) Bernoulli conditioned on z.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "infovae/autodiff.hpp"
#include "infovae/distributions.hpp"
#include "infovae/nn.hpp"
#include "infovae/random.hpp"

namespace infovae {

enum class DecoderKind { gaussian, bernoulli, autoregressive };

inline std::string to_string(DecoderKind k) {
    switch (k) {
        case DecoderKind::gaussian: return "gaussian";
        case DecoderKind::bernoulli: return "bernoulli";
        case DecoderKind::autoregressive: return "autoregressive";
    }
    return "?";
}

inline DecoderKind parse_decoder_kind(const std::string& s) {
    if (s == "gaussian" || s == "diag_gaussian") return DecoderKind::gaussian;
    if (s == "bernoulli") return DecoderKind::bernoulli;
    if (s == "autoregressive") return DecoderKind::autoregressive;
    throw ConfigError("unknown decoder kind '" + s + "'");
}

struct ModelConfig {
    std::size_t data_dim = 1;
    std::size_t latent_dim = 1;
    std::vector<std::size_t> encoder_hidden{64, 64};
    std::vector<std::size_t> decoder_hidden{64, 64};
    DecoderKind decoder = DecoderKind::gaussian;
    double clamp_floor = 0.0;  // lower bound added to every softplus-mapped std
};

/// Masked autoregressive decoder over binary x given z. Input x_j has degree
/// j+1, latent inputs degree 0, hidden unit k degree k mod d; output i sees
/// only units of degree <= i, hence only x_{<i} and z.
struct MadeDecoder {
    std::vector<Linear> layers;  // masked; first layer input is [x, z]
    Linear direct;               // x -> logits, strictly lower triangular mask

    static MadeDecoder create(std::size_t data_dim, std::size_t latent_dim, const std::vector<std::size_t>& hidden,
                              Rng& rng) {
        if (hidden.empty()) throw ConfigError("MadeDecoder: at least one hidden layer is required");
        MadeDecoder m;
        const std::size_t d = data_dim;
        std::vector<std::size_t> prev_deg(d + latent_dim, 0);
        for (std::size_t j = 0; j < d; ++j) prev_deg[j] = j + 1;
        for (auto h : hidden) {
            std::vector<std::size_t> deg(h);
            for (std::size_t k = 0; k < h; ++k) deg[k] = k % d;
            Linear l = make_linear(prev_deg.size(), h, rng);
            std::vector<double> mask(prev_deg.size() * h);
            for (std::size_t a = 0; a < prev_deg.size(); ++a)
                for (std::size_t k = 0; k < h; ++k) mask[a * h + k] = deg[k] >= prev_deg[a] ? 1.0 : 0.0;
            l.mask = Tensor::matrix(prev_deg.size(), h, std::move(mask));
            m.layers.push_back(std::move(l));
            prev_deg = std::move(deg);
        }
        Linear out = make_linear(prev_deg.size(), d, rng);
        std::vector<double> mask(prev_deg.size() * d);
        for (std::size_t a = 0; a < prev_deg.size(); ++a)
            for (std::size_t i = 0; i < d; ++i) mask[a * d + i] = prev_deg[a] <= i ? 1.0 : 0.0;
        out.mask = Tensor::matrix(prev_deg.size(), d, std::move(mask));
        m.layers.push_back(std::move(out));

        m.direct = make_linear(d, d, rng);
        std::vector<double> dmask(d * d);
        for (std::size_t j = 0; j < d; ++j)
            for (std::size_t i = 0; i < d; ++i) dmask[j * d + i] = j < i ? 1.0 : 0.0;
        m.direct.mask = Tensor::matrix(d, d, std::move(dmask));
        return m;
    }

    Tensor logits(const Tensor& x, const Tensor& z) const {
        Tensor h = concat_cols(x, z);
        for (std::size_t i = 0; i < layers.size(); ++i) {
            h = layers[i].forward(h);
            if (i + 1 < layers.size()) h = tanh(h);
        }
        return h + direct.forward(x);
    }

    std::vector<Tensor*> parameters() {
        std::vector<Tensor*> out;
        for (auto& l : layers) {
            out.push_back(&l.weight);
            out.push_back(&l.bias);
        }
        out.push_back(&direct.weight);
        out.push_back(&direct.bias);
        return out;
    }

    std::vector<std::string> parameter_names(const std::string& prefix) const {
        std::vector<std::string> out;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            out.push_back(prefix + ".layer" + std::to_string(i) + ".weight");
            out.push_back(prefix + ".layer" + std::to_string(i) + ".bias");
        }
        out.push_back(prefix + ".direct.weight");
        out.push_back(prefix + ".direct.bias");
        return out;
    }
};

struct ModelPair;

/// p_theta(x|z) for a batch of latent rows.
struct DecodedLikelihood {
    DecoderKind kind;
    std::optional<DiagGaussian> gaussian;
    std::optional<BernoulliVector> bernoulli;
    const MadeDecoder* made = nullptr;
    Tensor z;

    /// Per-row log p(x|z).
    Tensor log_prob(const Tensor& x) const {
        switch (kind) {
            case DecoderKind::gaussian: return gaussian_log_prob(*gaussian, x);
            case DecoderKind::bernoulli: return bernoulli_log_prob(*bernoulli, x);
            case DecoderKind::autoregressive: return bernoulli_log_prob_logits(made->logits(x, z), x);
        }
        throw ConfigError("unknown decoder kind");
    }

    Tensor sample(Rng& rng) const {
        switch (kind) {
            case DecoderKind::gaussian: {
                const Tensor noise = standard_normal(rng, gaussian->mean.rows(), gaussian->mean.cols());
                return rsample(DiagGaussian{gaussian->mean.detached(), gaussian->std.detached()}, noise);
            }
            case DecoderKind::bernoulli: return sample_bernoulli(bernoulli_probs(*bernoulli), rng);
            case DecoderKind::autoregressive: {
                const std::size_t n = z.rows(), d = made->direct.in_features();
                std::vector<double> x(n * d, 0.0);
                std::uniform_real_distribution<double> u(0.0, 1.0);
                const Tensor zc = z.detached();
                for (std::size_t i = 0; i < d; ++i) {
                    const Tensor l = made->logits(Tensor::matrix(n, d, x), zc);
                    for (std::size_t r = 0; r < n; ++r) {
                        const double p = detail::sigmoid(std::clamp(l.at(r, i), -kLogitClamp, kLogitClamp));
                        x[r * d + i] = u(rng) < p ? 1.0 : 0.0;
                    }
                }
                return Tensor::matrix(n, d, std::move(x));
            }
        }
        throw ConfigError("unknown decoder kind");
    }
};

struct ModelPair {
    ModelConfig config;
    Mlp encoder;
    Mlp decoder;       // gaussian / bernoulli
    MadeDecoder made;  // autoregressive

    static ModelPair create(const ModelConfig& cfg, std::uint64_t seed) {
        if (cfg.data_dim == 0 || cfg.latent_dim == 0) throw ConfigError("ModelPair: dimensions must be positive");
        if (cfg.clamp_floor < 0.0) throw ConfigError("ModelPair: clamp_floor must be >= 0");
        Rng rng = make_rng(seed, 0x6d6f64656cULL);
        ModelPair m;
        m.config = cfg;
        m.encoder = Mlp::create(cfg.data_dim, cfg.encoder_hidden, 2 * cfg.latent_dim, rng);
        switch (cfg.decoder) {
            case DecoderKind::gaussian:
                m.decoder = Mlp::create(cfg.latent_dim, cfg.decoder_hidden, 2 * cfg.data_dim, rng);
                break;
            case DecoderKind::bernoulli:
                m.decoder = Mlp::create(cfg.latent_dim, cfg.decoder_hidden, cfg.data_dim, rng);
                break;
            case DecoderKind::autoregressive:
                m.made = MadeDecoder::create(cfg.data_dim, cfg.latent_dim, cfg.decoder_hidden, rng);
                break;
        }
        return m;
    }

    std::size_t data_dim() const { return config.data_dim; }
    std::size_t latent_dim() const { return config.latent_dim; }

    std::vector<Tensor*> parameters() {
        auto out = encoder.parameters();
        auto dec = config.decoder == DecoderKind::autoregressive ? made.parameters() : decoder.parameters();
        out.insert(out.end(), dec.begin(), dec.end());
        return out;
    }

    std::vector<std::string> parameter_names() const {
        auto out = encoder.parameter_names("encoder");
        auto dec = config.decoder == DecoderKind::autoregressive ? made.parameter_names("decoder")
                                                                 : decoder.parameter_names("decoder");
        out.insert(out.end(), dec.begin(), dec.end());
        return out;
    }

    // Sampling/diagnostics interface (constant evaluations).
    Tensor sample_prior(std::size_t n, Rng& rng) const { return standard_normal(rng, n, latent_dim()); }
    Tensor log_prior(const Tensor& z) const { return standard_normal_log_prob(z.detached()); }
    Tensor sample_posterior(const Tensor& x, Rng& rng) const;
    Tensor log_posterior(const Tensor& z, const Tensor& x) const;
    Tensor log_posterior_matrix(const Tensor& z, const Tensor& x) const;
    Tensor sample_likelihood(const Tensor& z, Rng& rng) const;
    Tensor log_likelihood(const Tensor& x, const Tensor& z) const;
    Tensor kl_to_prior(const Tensor& x) const;
};

inline void require_cols(const char* op, const Tensor& t, std::size_t cols) {
    if (t.rank() != 2 || t.shape()[1] != cols)
        throw ShapeError(std::string(op) + ": expected " + std::to_string(cols) + " columns, got shape " +
                         to_string(t.shape()));
}

/// q_phi(z|x) for every row of x.
inline DiagGaussian encode(const ModelPair& m, const Tensor& x) {
    require_cols("encode", x, m.data_dim());
    const Tensor out = m.encoder.forward(x);
    const std::size_t l = m.latent_dim();
    return DiagGaussian::from_softplus(slice_cols(out, 0, l), slice_cols(out, l, 2 * l), m.config.clamp_floor);
}

/// p_theta(x|z) for every row of z.
inline DecodedLikelihood decode(const ModelPair& m, const Tensor& z) {
    require_cols("decode", z, m.latent_dim());
    DecodedLikelihood out{m.config.decoder, std::nullopt, std::nullopt, nullptr, z};
    switch (m.config.decoder) {
        case DecoderKind::gaussian: {
            const Tensor h = m.decoder.forward(z);
            const std::size_t d = m.data_dim();
            out.gaussian = DiagGaussian::from_softplus(slice_cols(h, 0, d), slice_cols(h, d, 2 * d), m.config.clamp_floor);
            break;
        }
        case DecoderKind::bernoulli: out.bernoulli = BernoulliVector{m.decoder.forward(z)}; break;
        case DecoderKind::autoregressive: out.made = &m.made; break;
    }
    return out;
}

inline Tensor ModelPair::sample_posterior(const Tensor& x, Rng& rng) const {
    const DiagGaussian q = encode(*this, x.detached());
    return rsample(q, standard_normal(rng, x.rows(), latent_dim()));
}

inline Tensor ModelPair::log_posterior(const Tensor& z, const Tensor& x) const {
    return gaussian_log_prob(encode(*this, x.detached()), z.detached());
}

inline Tensor ModelPair::log_posterior_matrix(const Tensor& z, const Tensor& x) const {
    const DiagGaussian q = encode(*this, x.detached());
    const std::size_t n = z.rows(), m = x.rows(), l = latent_dim();
    auto zv = z.values();
    auto mu = q.mean.values();
    auto sd = q.std.values();
    std::vector<double> log_sd_sum(m, 0.0);
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t c = 0; c < l; ++c) log_sd_sum[j] += std::log(sd[j * l + c]);
    std::vector<double> out(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double s = -log_sd_sum[j] - kHalfLog2Pi * static_cast<double>(l);
            for (std::size_t c = 0; c < l; ++c) {
                const double u = (zv[i * l + c] - mu[j * l + c]) / sd[j * l + c];
                s -= 0.5 * u * u;
            }
            out[i * m + j] = s;
        }
    return Tensor::matrix(n, m, std::move(out));
}

inline Tensor ModelPair::sample_likelihood(const Tensor& z, Rng& rng) const {
    return decode(*this, z.detached()).sample(rng);
}

inline Tensor ModelPair::log_likelihood(const Tensor& x, const Tensor& z) const {
    return decode(*this, z.detached()).log_prob(x.detached());
}

inline Tensor ModelPair::kl_to_prior(const Tensor& x) const {
    return kl_diag_gaussian_to_standard(encode(*this, x.detached()));
}

// ---- checkpoints -----------------------------------------------------------

inline constexpr int kCheckpointFormatVersion = 1;

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
    return {{"data_dim", c.data_dim},
            {"latent_dim", c.latent_dim},
            {"encoder_hidden", c.encoder_hidden},
            {"decoder_hidden", c.decoder_hidden},
            {"decoder", to_string(c.decoder)},
            {"clamp_floor", c.clamp_floor}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.data_dim = j.at("data_dim").get<std::size_t>();
    c.latent_dim = j.at("latent_dim").get<std::size_t>();
    c.encoder_hidden = j.at("encoder_hidden").get<std::vector<std::size_t>>();
    c.decoder_hidden = j.at("decoder_hidden").get<std::vector<std::size_t>>();
    c.decoder = parse_decoder_kind(j.at("decoder").get<std::string>());
    c.clamp_floor = j.at("clamp_floor").get<double>();
    return c;
}

inline nlohmann::json checkpoint_to_json(ModelPair model, std::size_t step) {
    nlohmann::json params = nlohmann::json::object();
    const auto names = model.parameter_names();
    const auto ps = model.parameters();
    for (std::size_t i = 0; i < ps.size(); ++i)
        params[names[i]] = {{"shape", ps[i]->shape()}, {"values", ps[i]->to_vector()}};
    return {{"format_version", kCheckpointFormatVersion},
            {"step", step},
            {"model", model_config_to_json(model.config)},
            {"parameters", params}};
}

inline ModelPair checkpoint_from_json(const nlohmann::json& j) {
    if (!j.contains("format_version") || j.at("format_version").get<int>() != kCheckpointFormatVersion)
        throw FormatError("checkpoint: unsupported format version (expected " + std::to_string(kCheckpointFormatVersion) + ")");
    ModelPair m = ModelPair::create(model_config_from_json(j.at("model")), 0);
    const auto names = m.parameter_names();
    const auto ps = m.parameters();
    const auto& params = j.at("parameters");
    if (params.size() != ps.size()) throw FormatError("checkpoint: parameter count mismatch");
    for (std::size_t i = 0; i < ps.size(); ++i) {
        if (!params.contains(names[i])) throw FormatError("checkpoint: missing parameter " + names[i]);
        const auto& e = params.at(names[i]);
        const auto shape = e.at("shape").get<Shape>();
        if (shape != ps[i]->shape()) throw FormatError("checkpoint: shape mismatch for " + names[i]);
        *ps[i] = Tensor(shape, e.at("values").get<std::vector<double>>());
    }
    return m;
}

inline void save_checkpoint(const std::filesystem::path& path, const ModelPair& model, std::size_t step) {
    std::ofstream os(path);
    if (!os) throw FormatError("checkpoint: cannot write " + path.string());
    os << checkpoint_to_json(model, step).dump() << '\n';
}

inline ModelPair load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("checkpoint: cannot read " + path.string());
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    }
    return checkpoint_from_json(j);
}

}  // namespace infovae
