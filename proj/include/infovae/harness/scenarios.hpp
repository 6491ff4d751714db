#pragma once

// Named experiment configurations.

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "infovae/harness/config.hpp"

namespace infovae::harness {

struct Scenario {
    std::string name;
    std::string description;
    /// One or more runs for a master seed, written below `out_dir`.
    std::function<std::vector<RunConfig>(std::uint64_t seed, const std::string& out_dir)> runs;
};

/// Two-point data {-1, 1}, 1-D latent, 2x200 tanh networks, std floor 0.
inline RunConfig two_point_base(std::uint64_t seed, const std::string& out_dir) {
    RunConfig c;
    c.seed = seed;
    c.steps = 20000;
    c.eval_every = 500;
    c.out_dir = out_dir;
    c.model.latent_dim = 1;
    c.model.encoder_hidden = {200, 200};
    c.model.decoder_hidden = {200, 200};
    c.model.decoder = DecoderKind::gaussian;
    c.model.clamp_floor = 0.0;
    c.data.name = "two_point";
    c.data.size = 2;
    c.optim.batch_size = 2;
    c.eval.metrics = {"logdet_cov", "mi_estimate", "mean_kl_qzx_pz", "ll_estimate", "var_gap"};
    c.eval.samples_per_x = 200;
    c.eval.mi_samples = 50;
    c.eval.ll_rows = 2;
    c.eval.ll_samples = 100;
    c.eval.sample_count = 200;
    return c;
}

inline RunConfig prop1_pathology(std::uint64_t seed, const std::string& out_dir) {
    RunConfig c = two_point_base(seed, out_dir);
    c.name = "prop1-pathology";
    c.objective.name = "elbo";
    c.expect_pathology = true;
    return c;
}

/// alpha = 0, lambda = 500, MMD on the two-point problem.
inline RunConfig prop1_infovae(std::uint64_t seed, const std::string& out_dir) {
    RunConfig c = two_point_base(seed, out_dir);
    c.name = "prop1-infovae";
    c.objective.name = "custom";
    c.objective.alpha = 0.0;
    c.objective.lambda = 500.0;
    c.objective.divergence = "mmd";
    c.steps = 5000;
    c.eval_every = 500;
    c.optim.batch_size = 16;
    return c;
}

/// 16-bit binary codes with a masked autoregressive decoder.
inline RunConfig info_preference_base(std::uint64_t seed, const std::string& out_dir) {
    RunConfig c;
    c.seed = seed;
    c.steps = 10000;
    c.eval_every = 1000;
    c.out_dir = out_dir;
    c.model.latent_dim = 10;
    c.model.encoder_hidden = {64, 64};
    c.model.decoder_hidden = {64, 64};
    c.model.decoder = DecoderKind::autoregressive;
    c.data.name = "binary_codes";
    c.data.size = 1000;
    c.data.classes = 8;
    c.data.dim = 16;
    c.data.flip = 0.05;
    c.data.seed = seed;
    c.optim.batch_size = 64;
    c.eval.metrics = {"mi_estimate", "mean_kl_qzx_pz", "probe_error", "logdet_cov", "class_ce"};
    c.eval.mi_mixture = 1000;
    c.eval.mi_samples = 2;
    return c;
}

inline std::vector<RunConfig> info_preference(std::uint64_t seed, const std::string& out_dir) {
    RunConfig elbo = info_preference_base(seed, out_dir + "/elbo");
    elbo.name = "info-preference-elbo";
    elbo.objective.name = "elbo";
    RunConfig ae = info_preference_base(seed, out_dir + "/autoencoder");
    ae.name = "info-preference-autoencoder";
    ae.objective.name = "unregularized";
    return {elbo, ae};
}

/// One point of the aggregate-covariance sweep over training-set size:
/// binarized 8x8 digits, Bernoulli decoder, 5-D latent. `param` is the
/// named objective's parameter, e.g. lambda for "infovae_mmd".
inline RunConfig logdet_sweep_run(const std::string& objective, double param, std::size_t size, std::uint64_t seed,
                                  const std::string& out_dir) {
    RunConfig c;
    c.name = "logdet-sweep";
    c.seed = seed;
    c.steps = 2000;
    c.eval_every = 2000;
    c.out_dir = out_dir;
    c.objective.name = objective;
    c.objective.param = param;
    c.model.latent_dim = 5;
    c.model.encoder_hidden = {128, 128};
    c.model.decoder_hidden = {128, 128};
    c.model.decoder = DecoderKind::bernoulli;
    c.data.name = "digits";
    c.data.size = size;
    c.data.seed = seed;
    c.data.binarize = true;
    c.optim.batch_size = 64;
    c.eval.metrics = {"logdet_cov", "mean_kl_qzx_pz"};
    c.eval.samples_per_x = std::max<std::size_t>(10, 2000 / size);
    return c;
}

inline const std::vector<Scenario>& scenarios() {
    static const std::vector<Scenario> all = {
        {"prop1-pathology", "two-point data, ELBO, std floor 0: encoder means diverge and the run ends in a numerical blow-up",
         [](std::uint64_t s, const std::string& o) { return std::vector<RunConfig>{prop1_pathology(s, o)}; }},
        {"prop1-infovae", "two-point data, alpha = 0, lambda = 500, MMD: aggregate posterior stays matched to the prior",
         [](std::uint64_t s, const std::string& o) { return std::vector<RunConfig>{prop1_infovae(s, o)}; }},
        {"info-preference", "16-bit binary codes, autoregressive decoder: ELBO vs plain autoencoder mutual information",
         [](std::uint64_t s, const std::string& o) { return info_preference(s, o); }},
    };
    return all;
}

inline const Scenario& find_scenario(const std::string& name) {
    for (const auto& s : scenarios())
        if (s.name == name) return s;
    throw ConfigError("unknown scenario '" + name + "'");
}

}  // namespace infovae::harness
