#pragma once

// A TabularJoint viewed as a latent-variable model so the samplers and
// estimators can be checked against exact finite sums. Data and latent values
// are category indices stored as doubles in 1-column matrices.

#include <cmath>
#include <random>
#include <vector>

#include "infovae/autodiff.hpp"
#include "infovae/random.hpp"
#include "infovae/tabular.hpp"

namespace infovae::tabular {

class TabularModel {
public:
    explicit TabularModel(TabularJoint j) : j_(std::move(j)) { j_.validate(1e-9); }

    const TabularJoint& joint() const { return j_; }
    std::size_t data_dim() const { return 1; }
    std::size_t latent_dim() const { return 1; }

    Tensor sample_prior(std::size_t n, Rng& rng) const {
        std::discrete_distribution<std::size_t> d(j_.p_z.begin(), j_.p_z.end());
        return draw(n, rng, [&](std::size_t) { return d(rng); });
    }
    Tensor log_prior(const Tensor& z) const {
        return map_rows(z, [&](std::size_t r) { return std::log(j_.p_z[index(z, r, j_.nz)]); });
    }
    Tensor sample_posterior(const Tensor& x, Rng& rng) const {
        return draw(x.rows(), rng, [&](std::size_t r) {
            const std::size_t xi = index(x, r, j_.nx);
            std::discrete_distribution<std::size_t> d(j_.q_z_given_x.begin() + static_cast<std::ptrdiff_t>(xi * j_.nz),
                                                      j_.q_z_given_x.begin() + static_cast<std::ptrdiff_t>((xi + 1) * j_.nz));
            return d(rng);
        });
    }
    Tensor log_posterior(const Tensor& z, const Tensor& x) const {
        return map_rows(z, [&](std::size_t r) { return std::log(j_.q(index(z, r, j_.nz), index(x, r, j_.nx))); });
    }
    /// [n, m] matrix of log q(z_i | x_j).
    Tensor log_posterior_matrix(const Tensor& z, const Tensor& x) const {
        std::vector<double> out(z.rows() * x.rows());
        for (std::size_t i = 0; i < z.rows(); ++i)
            for (std::size_t k = 0; k < x.rows(); ++k)
                out[i * x.rows() + k] = std::log(j_.q(index(z, i, j_.nz), index(x, k, j_.nx)));
        return Tensor::matrix(z.rows(), x.rows(), std::move(out));
    }
    Tensor sample_likelihood(const Tensor& z, Rng& rng) const {
        return draw(z.rows(), rng, [&](std::size_t r) {
            const std::size_t zi = index(z, r, j_.nz);
            std::discrete_distribution<std::size_t> d(j_.p_x_given_z.begin() + static_cast<std::ptrdiff_t>(zi * j_.nx),
                                                      j_.p_x_given_z.begin() + static_cast<std::ptrdiff_t>((zi + 1) * j_.nx));
            return d(rng);
        });
    }
    Tensor log_likelihood(const Tensor& x, const Tensor& z) const {
        return map_rows(x, [&](std::size_t r) { return std::log(j_.p(index(x, r, j_.nx), index(z, r, j_.nz))); });
    }
    /// Per-row KL(q(z|x) || p(z)).
    Tensor kl_to_prior(const Tensor& x) const {
        return map_rows(x, [&](std::size_t r) {
            return kl(&j_.q_z_given_x[index(x, r, j_.nx) * j_.nz], j_.p_z.data(), j_.nz).to_double();
        });
    }

private:
    static std::size_t index(const Tensor& t, std::size_t row, std::size_t n) {
        const double v = t.values()[row];
        if (!(v >= 0.0) || v != std::floor(v) || v >= static_cast<double>(n))
            throw ShapeError("TabularModel: value " + std::to_string(v) + " is not a category index below " + std::to_string(n));
        return static_cast<std::size_t>(v);
    }
    template <class F>
    static Tensor map_rows(const Tensor& t, F&& f) {
        std::vector<double> out(t.rows());
        for (std::size_t r = 0; r < out.size(); ++r) out[r] = f(r);
        return Tensor::vector(std::move(out));
    }
    template <class F>
    static Tensor draw(std::size_t n, Rng&, F&& f) {
        std::vector<double> out(n);
        for (std::size_t r = 0; r < n; ++r) out[r] = static_cast<double>(f(r));
        return Tensor::matrix(n, 1, std::move(out));
    }

    TabularJoint j_;
};

/// Exact log p_theta(x) for category x.
inline double exact_log_marginal(const TabularJoint& j, std::size_t x) { return std::log(j.p_marginal_x()[x]); }

}  // namespace infovae::tabular
