#pragma once

// Small dense networks: masked/unmasked linear layers and tanh MLPs, plus Adam.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "infovae/autodiff.hpp"
#include "infovae/random.hpp"

namespace infovae {

struct Linear {
    Tensor weight;               // [in, out]
    Tensor bias;                 // [out]
    std::optional<Tensor> mask;  // [in, out], 0/1, constant

    std::size_t in_features() const { return weight.shape()[0]; }
    std::size_t out_features() const { return weight.shape()[1]; }

    Tensor forward(const Tensor& x) const {
        const Tensor w = mask ? weight * *mask : weight;
        return matmul(x, w) + bias;
    }
};

/// Uniform fan-in initialization U(-1/sqrt(in), 1/sqrt(in)); zero bias.
inline Linear make_linear(std::size_t in, std::size_t out, Rng& rng, double gain = 1.0) {
    const double bound = gain / std::sqrt(static_cast<double>(in));
    return Linear{uniform(rng, in, out, -bound, bound), Tensor::zeros({out}), std::nullopt};
}

/// tanh hidden layers followed by a linear output layer.
struct Mlp {
    std::vector<Linear> layers;

    static Mlp create(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out, Rng& rng) {
        Mlp m;
        std::size_t prev = in;
        for (auto h : hidden) {
            m.layers.push_back(make_linear(prev, h, rng));
            prev = h;
        }
        m.layers.push_back(make_linear(prev, out, rng));
        return m;
    }

    std::size_t in_features() const { return layers.front().in_features(); }
    std::size_t out_features() const { return layers.back().out_features(); }

    Tensor forward(const Tensor& x) const {
        Tensor h = x;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            h = layers[i].forward(h);
            if (i + 1 < layers.size()) h = tanh(h);
        }
        return h;
    }

    void zero_output_layer() {
        auto& last = layers.back();
        last.weight = Tensor::zeros(last.weight.shape());
        last.bias = Tensor::zeros(last.bias.shape());
    }

    std::vector<Tensor*> parameters() {
        std::vector<Tensor*> out;
        for (auto& l : layers) {
            out.push_back(&l.weight);
            out.push_back(&l.bias);
        }
        return out;
    }

    std::vector<std::string> parameter_names(const std::string& prefix) const {
        std::vector<std::string> out;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            out.push_back(prefix + ".layer" + std::to_string(i) + ".weight");
            out.push_back(prefix + ".layer" + std::to_string(i) + ".bias");
        }
        return out;
    }
};

/// Replace every parameter with a tape-attached leaf.
template <class Model>
Model attach(const Model& model, Tape& tape) {
    Model bound = model;
    for (Tensor* p : bound.parameters()) *p = tape.variable(*p);
    return bound;
}

/// Replace every parameter with a constant copy (stop-gradient).
template <class Model>
Model detach(const Model& model) {
    Model m = model;
    for (Tensor* p : m.parameters()) *p = p->detached();
    return m;
}

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Optimizer moments for one parameter list; shapes mirror the parameters.
struct TrainState {
    std::size_t step = 0;
    AdamConfig config;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
    std::uint64_t rng_seed = 0;
};

/// Throws ShapeError / NumericError (naming the parameter) unless every
/// gradient matches its parameter and is finite.
inline void validate_gradients(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
                               const std::vector<std::string>& names = {}) {
    if (params.size() != grads.size()) throw ShapeError("adam_step: parameter and gradient counts differ");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (grads[i].shape() != params[i]->shape())
            throw ShapeError("adam_step: shape mismatch for parameter " + (i < names.size() ? names[i] : std::to_string(i)));
        for (double g : grads[i].values())
            if (!std::isfinite(g))
                throw NumericError("adam_step: non-finite gradient for parameter " +
                                   (i < names.size() ? names[i] : std::to_string(i)));
    }
}

/// One bias-corrected Adam update applied in place to `params`. Nothing is
/// modified when validation fails.
inline void adam_step(TrainState& state, const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
                      const std::vector<std::string>& names = {}) {
    validate_gradients(params, grads, names);
    if (!state.first_moment.empty()) {
        if (state.first_moment.size() != params.size()) throw ShapeError("adam_step: state does not match parameters");
        for (std::size_t i = 0; i < params.size(); ++i)
            if (state.first_moment[i].size() != params[i]->numel())
                throw ShapeError("adam_step: state shape mismatch for parameter " +
                                 (i < names.size() ? names[i] : std::to_string(i)));
    } else {
        for (const Tensor* p : params) {
            state.first_moment.emplace_back(p->numel(), 0.0);
            state.second_moment.emplace_back(p->numel(), 0.0);
        }
    }
    ++state.step;
    const auto& c = state.config;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(c.beta1, t);
    const double bc2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        std::vector<double> w = params[i]->to_vector();
        auto g = grads[i].values();
        for (std::size_t k = 0; k < w.size(); ++k) {
            m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
            v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            w[k] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon);
        }
        *params[i] = Tensor(params[i]->shape(), std::move(w));
    }
}

}  // namespace infovae
