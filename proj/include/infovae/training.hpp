#pragma once

// Minibatch training loop: rebuilds the tape every step, ascends the objective
// with Adam and, for the adversarial divergence, takes one discriminator step
// per model step.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "infovae/objectives.hpp"

namespace infovae {

struct TrainerConfig {
    ObjectiveSpec objective;
    AdamConfig adam;
    AdamConfig discriminator_adam;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
    std::optional<KernelSpec> kernel;  // defaults to default_kernel(latent_dim)
};

struct StepValues {
    double reconstruction = 0.0;
    double per_sample_kl = 0.0;
    double marginal_divergence = 0.0;
    double total = 0.0;
    std::optional<double> discriminator_loss;
};

/// Cycles through shuffled permutations of [0, n); a batch larger than n
/// spans several permutations.
class BatchSampler {
public:
    BatchSampler(std::size_t n, Rng rng) : n_(n), rng_(std::move(rng)), order_(n) {
        if (n == 0) throw ConfigError("BatchSampler: empty dataset");
        reshuffle();
    }

    std::vector<std::size_t> next(std::size_t batch) {
        std::vector<std::size_t> out;
        out.reserve(batch);
        while (out.size() < batch) {
            if (pos_ == n_) reshuffle();
            out.push_back(order_[pos_++]);
        }
        return out;
    }

private:
    void reshuffle() {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        std::shuffle(order_.begin(), order_.end(), rng_);
        pos_ = 0;
    }
    std::size_t n_;
    Rng rng_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
};

inline Tensor gather_rows(const Tensor& data, const std::vector<std::size_t>& idx) {
    const std::size_t d = data.cols();
    auto v = data.values();
    std::vector<double> out;
    out.reserve(idx.size() * d);
    for (auto i : idx) out.insert(out.end(), v.begin() + static_cast<std::ptrdiff_t>(i * d), v.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
    return Tensor::matrix(idx.size(), d, std::move(out));
}

class Trainer {
public:
    Trainer(ModelPair model, TrainerConfig cfg)
        : model_(std::move(model)),
          cfg_(std::move(cfg)),
          rng_(make_rng(cfg_.seed, 0x747261696eULL)) {
        if (cfg_.batch_size == 0) throw ConfigError("Trainer: batch_size must be >= 1");
        state_.config = cfg_.adam;
        state_.rng_seed = cfg_.seed;
        divergence_.kernel = cfg_.kernel ? *cfg_.kernel : default_kernel(model_.latent_dim());
        divergence_.kernel.validate();
        if (cfg_.objective.divergence == DivergenceKind::adversarial) {
            Rng drng = make_rng(cfg_.seed, 0x64697363ULL);
            divergence_.discriminator = Discriminator::create(model_.latent_dim(), drng);
            disc_state_.config = cfg_.discriminator_adam;
            disc_state_.rng_seed = cfg_.seed;
        }
    }

    const ModelPair& model() const { return model_; }
    ModelPair& model() { return model_; }
    const TrainState& state() const { return state_; }
    const DivergenceState& divergence_state() const { return divergence_; }
    std::size_t step_count() const { return state_.step; }

    /// One optimizer step on a batch drawn from `data`. On a non-finite loss or
    /// gradient a NumericError is thrown and the parameters are left untouched.
    StepValues step(const Tensor& data) {
        if (!sampler_ || sampler_n_ != data.rows()) {
            sampler_.emplace(data.rows(), make_rng(cfg_.seed, 0x6261746368ULL));
            sampler_n_ = data.rows();
        }
        return step_on_batch(gather_rows(data, sampler_->next(cfg_.batch_size)));
    }

    StepValues step_on_batch(const Tensor& batch) {
        const std::size_t b = batch.rows(), l = model_.latent_dim();
        const Tensor noise = standard_normal(rng_, b, l);
        const Tensor prior = standard_normal(rng_, b, l);

        Tape tape;
        ModelPair bound = attach(model_, tape);
        DivergenceState div = divergence_;
        if (div.discriminator) div.discriminator = attach(*div.discriminator, tape);
        const LossBreakdown loss = objective_loss(batch, bound, prior, noise, cfg_.objective, div);
        const double total = loss.total.item();
        if (!std::isfinite(total))
            throw NumericError("training step " + std::to_string(state_.step + 1) + ": non-finite objective " +
                               std::to_string(total));

        const Gradients grads = tape.backward(neg(loss.total));
        std::vector<Tensor> g;
        for (Tensor* p : bound.parameters()) g.push_back(grads.of(*p));

        std::vector<Tensor> dg;
        if (div.discriminator && loss.discriminator_loss) {
            const Gradients d = tape.backward(*loss.discriminator_loss);
            for (Tensor* p : div.discriminator->parameters()) dg.push_back(d.of(*p));
        }

        // Validate every update before applying any of them.
        if (!dg.empty()) validate_gradients(divergence_.discriminator->parameters(), dg);
        adam_step(state_, model_.parameters(), g, model_.parameter_names());
        if (!dg.empty()) adam_step(disc_state_, divergence_.discriminator->parameters(), dg);

        StepValues v;
        v.reconstruction = loss.reconstruction.item();
        v.per_sample_kl = loss.per_sample_kl.item();
        v.marginal_divergence = loss.marginal_divergence.item();
        v.total = total;
        if (loss.discriminator_loss) v.discriminator_loss = loss.discriminator_loss->item();
        return v;
    }

private:
    ModelPair model_;
    TrainerConfig cfg_;
    TrainState state_;
    TrainState disc_state_;
    DivergenceState divergence_;
    Rng rng_;
    std::optional<BatchSampler> sampler_;
    std::size_t sampler_n_ = 0;
};

}  // namespace infovae
