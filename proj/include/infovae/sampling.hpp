#pragma once

// Samplers over any latent-variable model exposing prior, encoder and decoder
// densities: ancestral sampling, the x -> z -> x Markov chain, importance
// sampled log-likelihood and low-dimensional true-posterior sampling.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "infovae/autodiff.hpp"
#include "infovae/errors.hpp"
#include "infovae/random.hpp"

namespace infovae {

/// All densities are per row; all tensors returned are constants.
template <class M>
concept LatentVariableModel = requires(const M& m, const Tensor& t, Rng& rng, std::size_t n) {
    { m.data_dim() } -> std::convertible_to<std::size_t>;
    { m.latent_dim() } -> std::convertible_to<std::size_t>;
    { m.sample_prior(n, rng) } -> std::same_as<Tensor>;
    { m.log_prior(t) } -> std::same_as<Tensor>;
    { m.sample_posterior(t, rng) } -> std::same_as<Tensor>;
    { m.log_posterior(t, t) } -> std::same_as<Tensor>;
    { m.sample_likelihood(t, rng) } -> std::same_as<Tensor>;
    { m.log_likelihood(t, t) } -> std::same_as<Tensor>;
};

namespace detail {
inline Tensor repeat_row(std::span<const double> x, std::size_t n) {
    std::vector<double> v;
    v.reserve(n * x.size());
    for (std::size_t i = 0; i < n; ++i) v.insert(v.end(), x.begin(), x.end());
    return Tensor::matrix(n, x.size(), std::move(v));
}

inline double log_mean_exp(std::span<const double> v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double a : v) m = std::max(m, a);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double a : v) s += std::exp(a - m);
    return m + std::log(s / static_cast<double>(v.size()));
}

template <class M>
void require_vector_dim(const char* op, std::span<const double> x, const M& model) {
    if (x.size() != model.data_dim())
        throw ShapeError(std::string(op) + ": x has " + std::to_string(x.size()) + " entries, model expects " +
                         std::to_string(model.data_dim()));
}
}  // namespace detail

/// z ~ p(z), x ~ p(x|z), one pair per row.
template <LatentVariableModel M>
Tensor ancestral_sample(const M& model, std::size_t n, Rng& rng) {
    if (n == 0) throw ConfigError("ancestral_sample: n must be >= 1");
    const Tensor z = model.sample_prior(n, rng);
    return model.sample_likelihood(z, rng);
}

struct ChainState {
    Tensor x;  // [1, D]
    Tensor z;  // [1, L]
    std::size_t t = 0;
    std::uint64_t rng_seed = 0;
};

struct ChainSamples {
    Tensor x;                        // [n, D]
    std::vector<std::size_t> steps;  // transition count at which each row was recorded
    ChainState final_state;
};

/// One transition: z ~ q(z|x), then x ~ p(x|z).
template <LatentVariableModel M>
void chain_step(const M& model, ChainState& s, Rng& rng) {
    s.z = model.sample_posterior(s.x, rng);
    s.x = model.sample_likelihood(s.z, rng);
    ++s.t;
}

/// Records the state after burn_in + k * thin transitions, k = 1..n.
template <LatentVariableModel M>
ChainSamples markov_chain_sample(const M& model, std::span<const double> init_x, std::size_t burn_in, std::size_t thin,
                                 std::size_t n, std::uint64_t seed) {
    if (thin == 0) throw ConfigError("markov_chain_sample: thin must be >= 1");
    if (n == 0) throw ConfigError("markov_chain_sample: n must be >= 1");
    detail::require_vector_dim("markov_chain_sample", init_x, model);
    Rng rng = make_rng(seed, 0x636861696eULL);
    ChainState s{Tensor::matrix(1, init_x.size(), {init_x.begin(), init_x.end()}), Tensor::zeros({1, model.latent_dim()}),
                 0, seed};
    for (std::size_t i = 0; i < burn_in; ++i) chain_step(model, s, rng);
    std::vector<double> out;
    out.reserve(n * model.data_dim());
    std::vector<std::size_t> steps;
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < thin; ++i) chain_step(model, s, rng);
        const auto v = s.x.values();
        out.insert(out.end(), v.begin(), v.end());
        steps.push_back(s.t);
    }
    return {Tensor::matrix(n, model.data_dim(), std::move(out)), std::move(steps), std::move(s)};
}

struct ImportanceEstimate {
    double log_likelihood;
    double std_error;  // delta-method SE of the log of the mean weight
};

/// log (1/k) sum_j p(x|z_j) p(z_j) / q(z_j|x), z_j ~ q(z|x).
template <LatentVariableModel M>
ImportanceEstimate importance_log_likelihood_with_error(const M& model, std::span<const double> x, std::size_t k, Rng& rng,
                                                        std::size_t chunk = 4096) {
    if (k == 0) throw ConfigError("importance_log_likelihood: k must be >= 1");
    detail::require_vector_dim("importance_log_likelihood", x, model);
    std::vector<double> logw;
    logw.reserve(k);
    for (std::size_t done = 0; done < k; done += chunk) {
        const std::size_t b = std::min(chunk, k - done);
        const Tensor xs = detail::repeat_row(x, b);
        const Tensor z = model.sample_posterior(xs, rng);
        const Tensor lp = model.log_prior(z);
        const Tensor ll = model.log_likelihood(xs, z);
        const Tensor lq = model.log_posterior(z, xs);
        for (std::size_t i = 0; i < b; ++i) logw.push_back(ll[i] + lp[i] - lq[i]);
    }
    const double lme = detail::log_mean_exp(logw);
    double se = 0.0;
    if (k > 1 && std::isfinite(lme)) {
        double s2 = 0.0;
        for (double a : logw) {
            const double r = std::exp(a - lme) - 1.0;  // w / mean(w) - 1
            s2 += r * r;
        }
        se = std::sqrt(s2 / static_cast<double>(k - 1) / static_cast<double>(k));
    }
    return {lme, se};
}

template <LatentVariableModel M>
double importance_log_likelihood(const M& model, std::span<const double> x, std::size_t k, Rng& rng) {
    return importance_log_likelihood_with_error(model, x, k, rng).log_likelihood;
}

/// Normalized p(z|x) mass on a regular lattice over [-bound, bound]^L (cell centres).
struct PosteriorGrid {
    std::size_t dim = 0;
    std::size_t resolution = 0;
    double bound = 0.0;
    std::vector<double> mass;  // row-major over the lattice, sums to 1
    double log_evidence = 0.0;  // log of the quadrature estimate of p(x)

    double cell_width() const { return 2.0 * bound / static_cast<double>(resolution); }
    double centre(std::size_t i) const { return -bound + (static_cast<double>(i) + 0.5) * cell_width(); }
    std::size_t cells() const { return mass.size(); }
    std::vector<double> point(std::size_t cell) const {
        std::vector<double> z(dim);
        for (std::size_t d = dim; d-- > 0;) {
            z[d] = centre(cell % resolution);
            cell /= resolution;
        }
        return z;
    }
    Tensor points() const {
        std::vector<double> v;
        v.reserve(cells() * dim);
        for (std::size_t c = 0; c < cells(); ++c) {
            const auto p = point(c);
            v.insert(v.end(), p.begin(), p.end());
        }
        return Tensor::matrix(cells(), dim, std::move(v));
    }
};

inline constexpr std::size_t kGridResolution = 400;
inline constexpr double kGridBound = 8.0;

template <LatentVariableModel M>
PosteriorGrid posterior_grid(const M& model, std::span<const double> x, std::size_t resolution = kGridResolution,
                             double bound = kGridBound, std::size_t chunk = 16384) {
    const std::size_t l = model.latent_dim();
    if (l > 2) throw ConfigError("posterior_grid: grid posterior requires latent_dim <= 2, got " + std::to_string(l));
    if (resolution == 0 || !(bound > 0.0)) throw ConfigError("posterior_grid: resolution and bound must be positive");
    detail::require_vector_dim("posterior_grid", x, model);
    PosteriorGrid g;
    g.dim = l;
    g.resolution = resolution;
    g.bound = bound;
    std::size_t cells = 1;
    for (std::size_t d = 0; d < l; ++d) cells *= resolution;
    std::vector<double> logp(cells);
    g.mass.assign(cells, 0.0);
    const Tensor all = g.points();
    for (std::size_t begin = 0; begin < cells; begin += chunk) {
        const std::size_t end = std::min(cells, begin + chunk);
        const Tensor z = slice_rows(all, begin, end);
        const Tensor xs = detail::repeat_row(x, end - begin);
        const Tensor lp = model.log_prior(z);
        const Tensor ll = model.log_likelihood(xs, z);
        for (std::size_t i = 0; i < end - begin; ++i) logp[begin + i] = lp[i] + ll[i];
    }
    const double lme = detail::log_mean_exp(logp);
    if (!std::isfinite(lme)) throw NumericError("posterior_grid: p(z) p(x|z) vanishes on the whole lattice");
    for (std::size_t c = 0; c < cells; ++c) g.mass[c] = std::exp(logp[c] - lme) / static_cast<double>(cells);
    double volume = 1.0;
    for (std::size_t d = 0; d < l; ++d) volume *= g.cell_width();
    g.log_evidence = lme + std::log(static_cast<double>(cells) * volume);
    return g;
}

enum class PosteriorMethod { grid, self_normalized_importance };

/// Samples from p(z|x) proportional to p(z) p(x|z). The grid method draws
/// lattice cell centres; the importance method resamples proposals from q(z|x).
template <LatentVariableModel M>
Tensor true_posterior_samples(const M& model, std::span<const double> x, std::size_t n, PosteriorMethod method, Rng& rng,
                              std::size_t proposals = 0) {
    if (n == 0) throw ConfigError("true_posterior_samples: n must be >= 1");
    detail::require_vector_dim("true_posterior_samples", x, model);
    const std::size_t l = model.latent_dim();
    std::vector<double> out;
    out.reserve(n * l);
    if (method == PosteriorMethod::grid) {
        const PosteriorGrid g = posterior_grid(model, x);
        std::discrete_distribution<std::size_t> pick(g.mass.begin(), g.mass.end());
        for (std::size_t i = 0; i < n; ++i) {
            const auto p = g.point(pick(rng));
            out.insert(out.end(), p.begin(), p.end());
        }
        return Tensor::matrix(n, l, std::move(out));
    }
    const std::size_t m = proposals ? proposals : std::max<std::size_t>(1000, 10 * n);
    const Tensor xs = detail::repeat_row(x, m);
    const Tensor z = model.sample_posterior(xs, rng);
    const Tensor lp = model.log_prior(z);
    const Tensor ll = model.log_likelihood(xs, z);
    const Tensor lq = model.log_posterior(z, xs);
    std::vector<double> logw(m);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
        logw[i] = lp[i] + ll[i] - lq[i];
        mx = std::max(mx, logw[i]);
    }
    if (!std::isfinite(mx)) throw NumericError("true_posterior_samples: all importance weights vanish");
    for (auto& w : logw) w = std::exp(w - mx);
    std::discrete_distribution<std::size_t> pick(logw.begin(), logw.end());
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = pick(rng);
        for (std::size_t c = 0; c < l; ++c) out.push_back(z.at(j, c));
    }
    return Tensor::matrix(n, l, std::move(out));
}

/// CSV with a header naming coordinates (prefix0, prefix1, ...); an optional
/// leading step column.
inline void write_samples_csv(std::ostream& os, const Tensor& samples, const std::string& prefix = "x",
                              const std::vector<std::size_t>* steps = nullptr) {
    os.precision(17);
    const std::size_t rows = samples.rows(), cols = samples.cols();
    if (steps && steps->size() != rows) throw ShapeError("write_samples_csv: step column length differs from sample count");
    if (steps) os << "step,";
    for (std::size_t c = 0; c < cols; ++c) os << prefix << c << (c + 1 < cols ? "," : "\n");
    for (std::size_t r = 0; r < rows; ++r) {
        if (steps) os << (*steps)[r] << ',';
        for (std::size_t c = 0; c < cols; ++c) os << samples.at(r, c) << (c + 1 < cols ? "," : "\n");
    }
}

inline void write_samples_csv(const std::filesystem::path& path, const Tensor& samples, const std::string& prefix = "x",
                              const std::vector<std::size_t>* steps = nullptr) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot write " + path.string());
    write_samples_csv(os, samples, prefix, steps);
}

}  // namespace infovae
