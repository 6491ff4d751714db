#pragma once

// Runs one configured training job and writes its artifacts: metrics stream,
// checkpoint, sample dumps and a manifest with content hashes.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "infovae/diagnostics.hpp"
#include "infovae/harness/config.hpp"
#include "infovae/harness/datasets.hpp"
#include "infovae/sampling.hpp"
#include "infovae/training.hpp"

namespace infovae::harness {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;

inline Dataset build_dataset(const DataConfig& c) {
    Dataset d;
    if (c.name == "two_point") {
        d = two_point_dataset();
    } else if (c.name == "mixture") {
        d = synthetic_mixture(c.classes, c.size, c.separation, c.seed);
    } else if (c.name == "binary_codes") {
        d = synthetic_binary_codes(c.size, c.classes, c.seed, c.dim, c.flip);
    } else if (c.name == "digits") {
        d = synthetic_digits(c.size, c.seed);
    } else if (c.name == "file") {
        d = load_digits_idx(c.path, c.labels_path.empty() ? std::nullopt : std::optional<std::filesystem::path>(c.labels_path));
        if (c.size < d.size()) d = head(d, c.size);
    } else {
        throw ConfigError("unknown dataset '" + c.name + "'");
    }
    if (c.binarize && !d.binarized) d = binarize_stochastic(d, c.seed);
    d.validate();
    return d;
}

/// Git blob id: SHA-1 of "blob <size>\0" followed by the content.
inline std::string git_blob_sha1(const std::string& content) {
    const std::string header = "blob " + std::to_string(content.size()) + '\0';
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx) throw std::runtime_error("git_blob_sha1: cannot allocate digest context");
    const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 && EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                    EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 && EVP_DigestFinal_ex(ctx, md, &len) == 1;
    EVP_MD_CTX_free(ctx);
    if (!ok) throw std::runtime_error("git_blob_sha1: digest failed");
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return os.str();
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

/// Nearest class centroid in data space, for labelling generated samples.
class CentroidLabeler {
public:
    explicit CentroidLabeler(const Dataset& d) : dim_(d.dim()) {
        const std::size_t k = d.num_classes();
        centroids_.assign(k * dim_, 0.0);
        std::vector<double> counts(k, 0.0);
        for (std::size_t i = 0; i < d.size(); ++i) {
            const auto c = static_cast<std::size_t>((*d.labels)[i]);
            counts[c] += 1.0;
            for (std::size_t j = 0; j < dim_; ++j) centroids_[c * dim_ + j] += d.x.at(i, j);
        }
        for (std::size_t c = 0; c < k; ++c)
            for (std::size_t j = 0; j < dim_; ++j) centroids_[c * dim_ + j] /= std::max(counts[c], 1.0);
    }
    std::vector<int> operator()(const Tensor& x) const {
        const std::size_t k = centroids_.size() / dim_;
        std::vector<int> out(x.rows());
        for (std::size_t i = 0; i < x.rows(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                double d2 = 0.0;
                for (std::size_t j = 0; j < dim_; ++j) d2 += (x.at(i, j) - centroids_[c * dim_ + j]) * (x.at(i, j) - centroids_[c * dim_ + j]);
                if (d2 < best) {
                    best = d2;
                    out[i] = static_cast<int>(c);
                }
            }
        }
        return out;
    }

private:
    std::size_t dim_;
    std::vector<double> centroids_;
};

inline ExtReal as_ext(double v) {
    if (std::isnan(v)) return ExtReal::undefined();
    if (std::isinf(v)) return v > 0 ? ExtReal::pos_inf() : ExtReal::neg_inf();
    return v;
}

/// The diagnostics battery selected by `eval.metrics`. Metrics that do not
/// apply (no labels, latent_dim > 2) or cannot be computed are left out.
inline MetricsRecord evaluate_metrics(const ModelPair& model, const Dataset& data, const EvalConfig& eval, std::size_t step,
                                      std::uint64_t seed, const KernelSpec& kernel) {
    MetricsRecord rec;
    rec.step = step;
    Rng rng = make_rng(seed, 0x6576616c00000000ULL + step);
    auto wants = [&](const char* m) { return std::find(eval.metrics.begin(), eval.metrics.end(), m) != eval.metrics.end(); };
    auto guarded = [&](const char* name, auto&& f) {
        try {
            f();
        } catch (const NumericError&) {
            rec.values.erase(name);
        }
    };
    const Tensor& x = data.x;
    if (wants("logdet_cov"))
        guarded("logdet_cov", [&] { rec.values["logdet_cov"] = logdet_cov_aggregate(model, x, eval.samples_per_x, rng, eval.logdet_per_dim); });
    if (wants("mi_estimate"))
        guarded("mi_estimate", [&] {
            const auto mi = mi_estimate(model, x, std::min(eval.mi_mixture, data.size()), eval.mi_samples, rng);
            rec.values["mi_estimate"] = as_ext(mi.value);
            rec.values["mi_estimate_se"] = as_ext(mi.std_error);
        });
    if (wants("full_mmd")) guarded("full_mmd", [&] { rec.values["full_mmd"] = as_ext(full_mmd(model, x, kernel, rng)); });
    if (wants("mean_kl_qzx_pz")) guarded("mean_kl_qzx_pz", [&] { rec.values["mean_kl_qzx_pz"] = as_ext(mean_kl_qzx_pz(model, x)); });
    if (wants("ll_estimate") && eval.ll_rows > 0)
        guarded("ll_estimate", [&] {
            const std::size_t rows = std::min(eval.ll_rows, data.size());
            double s = 0.0;
            for (std::size_t i = 0; i < rows; ++i)
                s += importance_log_likelihood(model, x.values().subspan(i * data.dim(), data.dim()), eval.ll_samples, rng);
            rec.values["ll_estimate"] = as_ext(s / static_cast<double>(rows));
        });
    if (data.labels && data.num_classes() >= 2) {
        if (wants("class_ce") && eval.class_ce_samples > 0)
            guarded("class_ce", [&] {
                const Tensor samples = ancestral_sample(model, eval.class_ce_samples, rng);
                rec.values["class_ce"] = as_ext(class_distribution_ce(data.label_distribution(), CentroidLabeler(data)(samples)));
            });
        if (wants("probe_error")) {
            const auto n_labeled = static_cast<std::size_t>(eval.probe_fraction * static_cast<double>(data.size()));
            if (n_labeled >= 2 && n_labeled < data.size())
                guarded("probe_error", [&] {
                    const Tensor z = model.sample_posterior(x, rng);
                    rec.values["probe_error"] = as_ext(linear_probe(z, *data.labels, n_labeled));
                });
        }
    }
    if (wants("var_gap") && model.latent_dim() <= 2) {
        guarded("var_gap", [&] {
            const std::size_t rows = std::min<std::size_t>(data.size(), 4);
            double s = 0.0;
            for (std::size_t i = 0; i < rows; ++i)
                s += variational_gap(model, x.values().subspan(i * data.dim(), data.dim()),
                                     model.latent_dim() == 1 ? 4000 : 200);
            rec.values["var_gap"] = as_ext(s / static_cast<double>(rows));
        });
    }
    return rec;
}

struct RunResult {
    int exit_status = kExitOk;
    bool pathology = false;  // training stopped on a non-finite objective or gradient
    std::string message;
    std::size_t steps_completed = 0;
    std::vector<MetricsRecord> records;
    std::optional<ModelPair> model;  // last good parameters
    std::optional<Dataset> data;
    std::map<std::string, std::string> output_hashes;
};

struct RunOptions {
    bool write_outputs = true;
    std::ostream* log = nullptr;
};

inline TrainerConfig trainer_config(const RunConfig& cfg) {
    TrainerConfig t;
    t.objective = cfg.objective_spec();
    t.adam = {cfg.optim.learning_rate, cfg.optim.beta1, cfg.optim.beta2, cfg.optim.epsilon};
    t.discriminator_adam = {cfg.optim.discriminator_learning_rate, cfg.optim.beta1, cfg.optim.beta2, cfg.optim.epsilon};
    t.batch_size = cfg.optim.batch_size;
    t.seed = cfg.seed;
    return t;
}

inline void add_step_values(MetricsRecord& rec, const StepValues& v) {
    rec.values["loss_reconstruction"] = as_ext(v.reconstruction);
    rec.values["loss_kl"] = as_ext(v.per_sample_kl);
    rec.values["loss_divergence"] = as_ext(v.marginal_divergence);
    rec.values["loss_total"] = as_ext(v.total);
    if (v.discriminator_loss) rec.values["loss_discriminator"] = as_ext(*v.discriminator_loss);
}

inline void write_run_outputs(const RunConfig& cfg, RunResult& r) {
    namespace fs = std::filesystem;
    const fs::path dir = cfg.out_dir;
    fs::create_directories(dir);
    const std::string metrics_name = cfg.format == "json" ? "metrics.json" : "metrics.csv";
    {
        std::ofstream os(dir / metrics_name);
        if (!os) throw FormatError("cannot write " + (dir / metrics_name).string());
        if (cfg.format == "json")
            write_metrics_json(os, r.records);
        else
            write_metrics_csv(os, r.records);
    }
    save_checkpoint(dir / "checkpoint.json", *r.model, r.steps_completed);
    Rng rng = make_rng(cfg.seed, 0x73616d706c6573ULL);
    write_samples_csv(dir / "samples_ancestral.csv", ancestral_sample(*r.model, cfg.eval.sample_count, rng));
    const auto chain = markov_chain_sample(*r.model, r.data->x.values().subspan(0, r.data->dim()), cfg.eval.chain_burn_in,
                                           cfg.eval.chain_thin, cfg.eval.sample_count, cfg.seed);
    write_samples_csv(dir / "samples_chain.csv", chain.x, "x", &chain.steps);

    for (const char* f : {"checkpoint.json", "samples_ancestral.csv", "samples_chain.csv"})
        r.output_hashes[f] = git_blob_sha1(read_file(dir / f));
    r.output_hashes[metrics_name] = git_blob_sha1(read_file(dir / metrics_name));
    nlohmann::json manifest = {{"config", to_config_text(cfg)},
                               {"objective", {{"name", cfg.objective_spec().name},
                                              {"alpha", cfg.objective_spec().alpha},
                                              {"lambda", cfg.objective_spec().lambda},
                                              {"warn", cfg.objective_spec().warn}}},
                               {"steps_completed", r.steps_completed},
                               {"pathology", r.pathology},
                               {"exit_status", r.exit_status},
                               {"message", r.message},
                               {"outputs", r.output_hashes}};
    std::ofstream os(dir / "manifest.json");
    os << manifest.dump(2) << '\n';
}

/// Trains per `cfg`, evaluating every eval_every steps and at the last step.
/// A non-finite objective or gradient stops training with the last good
/// parameters kept; it is a success only when cfg.expect_pathology is set.
inline RunResult run_experiment(const RunConfig& cfg, const RunOptions& opts = {}) {
    cfg.validate();
    RunResult r;
    Dataset data = build_dataset(cfg.data);
    ModelConfig mc = cfg.model;
    mc.data_dim = data.dim();
    if (mc.decoder != DecoderKind::gaussian && !data.binarized)
        throw ConfigError("config: the " + to_string(mc.decoder) + " decoder needs binary data (set data.binarize = true)");
    Trainer trainer(ModelPair::create(mc, cfg.seed), trainer_config(cfg));
    const KernelSpec kernel = trainer.divergence_state().kernel;
    if (opts.log && trainer_config(cfg).objective.warn)
        *opts.log << "warning: objective outside alpha < 1, lambda > 0; the optimum need not match the data distribution\n";

    StepValues last{};
    for (std::size_t s = 1; s <= cfg.steps; ++s) {
        try {
            last = trainer.step(data.x);
        } catch (const NumericError& e) {
            r.pathology = true;
            r.message = e.what();
            break;
        }
        r.steps_completed = s;
        if (s % cfg.eval_every == 0 || s == cfg.steps) {
            MetricsRecord rec = evaluate_metrics(trainer.model(), data, cfg.eval, s, cfg.seed, kernel);
            add_step_values(rec, last);
            r.records.push_back(std::move(rec));
            if (opts.log) {
                *opts.log << "step " << s;
                for (const auto& [k, v] : r.records.back().values) *opts.log << ' ' << k << '=' << v;
                *opts.log << '\n';
            }
        }
    }
    if (r.pathology) {
        r.exit_status = cfg.expect_pathology ? kExitOk : kExitNumeric;
        if (opts.log) *opts.log << "numerical abort after step " << r.steps_completed << ": " << r.message << '\n';
    }
    r.model = trainer.model();
    r.data = std::move(data);
    if (opts.write_outputs) write_run_outputs(cfg, r);
    return r;
}

}  // namespace infovae::harness
