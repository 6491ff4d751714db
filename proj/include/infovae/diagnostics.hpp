#pragma once

// Measurements on frozen models: aggregate-posterior covariance, mutual
// information, KL to the prior, label-distribution cross entropy, a linear
// probe on latent features and the variational gap in low dimension.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "infovae/divergences.hpp"
#include "infovae/extended.hpp"
#include "infovae/sampling.hpp"

namespace infovae {

/// A latent-variable model whose encoder can be evaluated against many x at once.
template <class M>
concept EncoderModel = LatentVariableModel<M> && requires(const M& m, const Tensor& t) {
    { m.log_posterior_matrix(t, t) } -> std::same_as<Tensor>;
    { m.kl_to_prior(t) } -> std::same_as<Tensor>;
};

/// log det of the sample covariance of z ~ q(z|x) over the rows of `data`,
/// `samples_per_x` draws each. Divided by latent_dim when `per_dim` is set.
/// A singular covariance gives the -inf marker.
template <LatentVariableModel M>
ExtReal logdet_cov_aggregate(const M& model, const Tensor& data, std::size_t samples_per_x, Rng& rng, bool per_dim = false) {
    const std::size_t l = model.latent_dim();
    const std::size_t total = data.rows() * samples_per_x;
    if (total < l + 1)
        throw ConfigError("logdet_cov_aggregate: need at least latent_dim + 1 = " + std::to_string(l + 1) + " samples, got " +
                          std::to_string(total));
    Eigen::MatrixXd z(total, l);
    for (std::size_t s = 0; s < samples_per_x; ++s) {
        const Tensor zs = model.sample_posterior(data, rng);
        for (std::size_t r = 0; r < data.rows(); ++r)
            for (std::size_t c = 0; c < l; ++c) z(static_cast<Eigen::Index>(s * data.rows() + r), static_cast<Eigen::Index>(c)) = zs.at(r, c);
    }
    const Eigen::RowVectorXd mu = z.colwise().mean();
    const Eigen::MatrixXd centred = z.rowwise() - mu;
    const Eigen::MatrixXd cov = centred.transpose() * centred / static_cast<double>(total - 1);
    if (!cov.allFinite()) return ExtReal::undefined();
    const Eigen::VectorXd eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(cov, Eigen::EigenvaluesOnly).eigenvalues();
    const double largest = eig.maxCoeff();
    if (!(largest > 0.0) || eig.minCoeff() <= largest * 1e-14 * static_cast<double>(l)) return ExtReal::neg_inf();
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < eig.size(); ++i) logdet += std::log(eig(i));
    return per_dim ? logdet / static_cast<double>(l) : logdet;
}

struct MiEstimate {
    double value;
    double std_error;
};

/// Mixture estimator: mean over x_i and z ~ q(z|x_i) of log q(z|x_i) - log q_hat(z),
/// q_hat(z) = (1/m) sum_{j<m} q(z|x_j) over the first m rows of data.
template <EncoderModel M>
MiEstimate mi_estimate(const M& model, const Tensor& data, std::size_t m_mixture, std::size_t n_mc, Rng& rng,
                       std::size_t chunk = 2048) {
    const std::size_t n = data.rows();
    if (m_mixture == 0 || m_mixture > n) throw ConfigError("mi_estimate: m_mixture must be in [1, rows(data)]");
    if (n_mc == 0) throw ConfigError("mi_estimate: n_mc must be >= 1");
    const Tensor mixture = slice_rows(data.detached(), 0, m_mixture);
    std::vector<double> terms;
    terms.reserve(n * n_mc);
    const std::size_t rows_per_chunk = std::max<std::size_t>(1, chunk / n_mc);
    for (std::size_t begin = 0; begin < n; begin += rows_per_chunk) {
        const std::size_t end = std::min(n, begin + rows_per_chunk);
        const Tensor xb = slice_rows(data.detached(), begin, end);
        for (std::size_t s = 0; s < n_mc; ++s) {
            const Tensor z = model.sample_posterior(xb, rng);
            const Tensor own = model.log_posterior(z, xb);
            const Tensor cross = model.log_posterior_matrix(z, mixture);
            auto cv = cross.values();
            for (std::size_t r = 0; r < end - begin; ++r)
                terms.push_back(own[r] - detail::log_mean_exp(cv.subspan(r * m_mixture, m_mixture)));
        }
    }
    CompensatedSum s;
    for (double t : terms) s.add(t);
    const double mean = s.value() / static_cast<double>(terms.size());
    double var = 0.0;
    for (double t : terms) var += (t - mean) * (t - mean);
    const double k = static_cast<double>(terms.size());
    const double se = terms.size() > 1 ? std::sqrt(var / (k - 1.0) / k) : 0.0;
    return {mean, se};
}

/// Mean over rows of KL(q(z|x) || p(z)).
template <EncoderModel M>
double mean_kl_qzx_pz(const M& model, const Tensor& data) {
    const Tensor kl = model.kl_to_prior(data);
    CompensatedSum s;
    for (double v : kl.values()) s.add(v);
    return s.value() / static_cast<double>(kl.numel());
}

/// -sum_i c_i (log c_hat_i - log c_i) with c_hat the add-one smoothed label
/// frequencies; equals KL(c || c_hat).
inline double class_distribution_ce(const std::vector<double>& true_dist, const std::vector<int>& sample_labels) {
    if (sample_labels.empty()) throw ConfigError("class_distribution_ce: no sample labels");
    const std::size_t k = true_dist.size();
    CompensatedSum total;
    for (double c : true_dist) {
        if (!(c >= 0.0)) throw ConfigError("class_distribution_ce: negative class probability");
        total.add(c);
    }
    if (std::abs(total.value() - 1.0) > 1e-9) throw ConfigError("class_distribution_ce: true_dist does not sum to 1");
    std::vector<double> counts(k, 1.0);
    for (int y : sample_labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= k)
            throw ConfigError("class_distribution_ce: label " + std::to_string(y) + " out of range");
        counts[static_cast<std::size_t>(y)] += 1.0;
    }
    const double denom = static_cast<double>(sample_labels.size() + k);
    CompensatedSum s;
    for (std::size_t i = 0; i < k; ++i)
        if (true_dist[i] > 0.0) s.add(-true_dist[i] * (std::log(counts[i] / denom) - std::log(true_dist[i])));
    return s.value();
}

struct ProbeConfig {
    std::size_t iterations = 500;
    double learning_rate = 0.5;
    double l2 = 1e-4;
};

/// Multinomial logistic regression fit on the first n_labeled rows by full-batch
/// gradient descent on standardized features; returns the error rate on the rest.
inline double linear_probe(const Tensor& latents, const std::vector<int>& labels, std::size_t n_labeled,
                           const ProbeConfig& cfg = {}) {
    const std::size_t n = latents.rows(), d = latents.cols();
    if (labels.size() != n) throw ShapeError("linear_probe: label count differs from latent rows");
    if (n_labeled == 0 || n_labeled >= n) throw ConfigError("linear_probe: n_labeled must be in [1, rows)");
    int max_label = 0;
    for (int y : labels) {
        if (y < 0) throw ConfigError("linear_probe: negative label");
        max_label = std::max(max_label, y);
    }
    const std::size_t k = static_cast<std::size_t>(max_label) + 1;
    bool multi = false;
    for (std::size_t i = 1; i < n_labeled; ++i) multi |= labels[i] != labels[0];
    if (!multi) throw ConfigError("linear_probe: labeled subset contains a single class");

    using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Mat x = Eigen::Map<const Mat>(latents.values().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    const auto lab = x.topRows(static_cast<Eigen::Index>(n_labeled));
    const Eigen::RowVectorXd mu = lab.colwise().mean();
    Eigen::RowVectorXd sd = ((lab.rowwise() - mu).array().square().colwise().sum() / static_cast<double>(n_labeled)).sqrt();
    for (Eigen::Index c = 0; c < sd.size(); ++c) sd(c) = sd(c) > 1e-12 ? sd(c) : 0.0;
    for (Eigen::Index c = 0; c < sd.size(); ++c) {
        if (sd(c) == 0.0)
            x.col(c).setZero();
        else
            x.col(c) = (x.col(c).array() - mu(c)) / sd(c);
    }
    const Mat xl = x.topRows(static_cast<Eigen::Index>(n_labeled));
    Mat y = Mat::Zero(static_cast<Eigen::Index>(n_labeled), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < n_labeled; ++i) y(static_cast<Eigen::Index>(i), labels[i]) = 1.0;

    Mat w = Mat::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k));
    Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(k));
    const double inv_n = 1.0 / static_cast<double>(n_labeled);
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        Mat logits = (xl * w).rowwise() + b;
        for (Eigen::Index r = 0; r < logits.rows(); ++r) {
            const double m = logits.row(r).maxCoeff();
            logits.row(r) = (logits.row(r).array() - m).exp();
            logits.row(r) /= logits.row(r).sum();
        }
        const Mat g = (logits - y) * inv_n;
        w -= cfg.learning_rate * (xl.transpose() * g + cfg.l2 * w);
        b -= cfg.learning_rate * g.colwise().sum();
    }
    const Mat scores = (x.bottomRows(static_cast<Eigen::Index>(n - n_labeled)) * w).rowwise() + b;
    std::size_t wrong = 0;
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        Eigen::Index arg = 0;
        scores.row(r).maxCoeff(&arg);
        wrong += static_cast<int>(arg) != labels[n_labeled + static_cast<std::size_t>(r)];
    }
    return static_cast<double>(wrong) / static_cast<double>(n - n_labeled);
}

/// Error of always predicting the most frequent held-out class.
inline double chance_error(const std::vector<int>& labels, std::size_t n_labeled) {
    std::map<int, std::size_t> counts;
    for (std::size_t i = n_labeled; i < labels.size(); ++i) ++counts[labels[i]];
    std::size_t best = 0;
    for (const auto& [label, c] : counts) best = std::max(best, c);
    return 1.0 - static_cast<double>(best) / static_cast<double>(labels.size() - n_labeled);
}

/// KL(q(z|x) || p(z|x)) by quadrature on the posterior lattice. Throws when q
/// puts more than `tolerance` mass off the lattice (or below its resolution).
template <LatentVariableModel M>
double variational_gap(const M& model, std::span<const double> x, std::size_t resolution = kGridResolution,
                       double bound = kGridBound, double tolerance = 1e-4) {
    const PosteriorGrid g = posterior_grid(model, x, resolution, bound);
    const Tensor z = g.points();
    const Tensor xs = detail::repeat_row(x, g.cells());
    const Tensor lq = model.log_posterior(z, xs);
    double volume = 1.0;
    for (std::size_t d = 0; d < g.dim; ++d) volume *= g.cell_width();
    const double log_volume = std::log(volume);
    CompensatedSum q_mass, kl;
    for (std::size_t c = 0; c < g.cells(); ++c) {
        const double qc = std::exp(lq[c] + log_volume);
        if (qc == 0.0) continue;
        q_mass.add(qc);
        if (g.mass[c] == 0.0) return std::numeric_limits<double>::infinity();
        kl.add(qc * (lq[c] + log_volume - std::log(g.mass[c])));
    }
    if (std::abs(q_mass.value() - 1.0) > tolerance)
        throw NumericError("variational_gap: q(z|x) has mass " + std::to_string(q_mass.value()) +
                           " on the lattice; widen the lattice bound or raise its resolution");
    return kl.value();
}

/// Biased MMD between one q(z|x) draw per data row and as many prior draws,
/// on at most `max_points` rows.
template <LatentVariableModel M>
double full_mmd(const M& model, const Tensor& data, const KernelSpec& kernel, Rng& rng, std::size_t max_points = 2000) {
    const std::size_t n = std::min(data.rows(), max_points);
    const Tensor zq = model.sample_posterior(slice_rows(data.detached(), 0, n), rng);
    const Tensor zp = model.sample_prior(n, rng);
    return mmd_vstat(zq, zp, kernel).item();
}

/// One evaluation of the metric battery at a training step.
struct MetricsRecord {
    std::size_t step = 0;
    std::map<std::string, ExtReal> values;
};

inline void write_metrics_csv(std::ostream& os, const std::vector<MetricsRecord>& records) {
    os.precision(17);
    os << "step,metric,value\n";
    for (const auto& r : records)
        for (const auto& [name, v] : r.values) os << r.step << ',' << name << ',' << v.to_double() << '\n';
}

inline void write_metrics_json(std::ostream& os, const std::vector<MetricsRecord>& records) {
    os.precision(17);
    os << "[";
    for (std::size_t i = 0; i < records.size(); ++i) {
        os << (i ? ",\n " : "") << "{\"step\": " << records[i].step;
        for (const auto& [name, v] : records[i].values) {
            os << ", \"" << name << "\": ";
            if (v.is_finite())
                os << v.value();
            else
                os << '"' << v.str() << '"';
        }
        os << "}";
    }
    os << "]\n";
}

}  // namespace infovae
