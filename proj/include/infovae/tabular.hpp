#pragma once

// Exact computations on finite X and Z. Every quantity here is a finite sum, so
// identities between objective forms can be checked to near machine precision.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "infovae/errors.hpp"
#include "infovae/extended.hpp"
#include "infovae/random.hpp"

namespace infovae::tabular {

/// p(z), p_theta(x|z), q_phi(z|x), p_D(x) on finite spaces. Conditionals are
/// stored row-major: p_x_given_z[z * nx + x], q_z_given_x[x * nz + z].
struct TabularJoint {
    std::size_t nx = 0;
    std::size_t nz = 0;
    std::vector<double> p_z;
    std::vector<double> p_x_given_z;
    std::vector<double> q_z_given_x;
    std::vector<double> p_data;

    double p(std::size_t x, std::size_t z) const { return p_x_given_z[z * nx + x]; }
    double q(std::size_t z, std::size_t x) const { return q_z_given_x[x * nz + z]; }

    void validate(double tol = 1e-12) const {
        auto check_simplex = [tol](const double* v, std::size_t n, const std::string& what) {
            CompensatedSum s;
            for (std::size_t i = 0; i < n; ++i) {
                if (!(v[i] >= 0.0)) throw ConfigError("TabularJoint: negative entry in " + what);
                s.add(v[i]);
            }
            if (std::abs(s.value() - 1.0) > tol) throw ConfigError("TabularJoint: " + what + " does not sum to 1");
        };
        if (nx == 0 || nz == 0) throw ConfigError("TabularJoint: empty space");
        if (p_z.size() != nz || p_data.size() != nx || p_x_given_z.size() != nz * nx || q_z_given_x.size() != nx * nz)
            throw ShapeError("TabularJoint: table sizes do not match nx/nz");
        check_simplex(p_z.data(), nz, "p_z");
        check_simplex(p_data.data(), nx, "p_data");
        for (std::size_t z = 0; z < nz; ++z) check_simplex(&p_x_given_z[z * nx], nx, "p(x|z=" + std::to_string(z) + ")");
        for (std::size_t x = 0; x < nx; ++x) check_simplex(&q_z_given_x[x * nz], nz, "q(z|x=" + std::to_string(x) + ")");
    }

    /// q(x, z) = p_D(x) q(z|x), indexed [x * nz + z].
    std::vector<double> q_joint() const {
        std::vector<double> j(nx * nz);
        for (std::size_t x = 0; x < nx; ++x)
            for (std::size_t z = 0; z < nz; ++z) j[x * nz + z] = p_data[x] * q(z, x);
        return j;
    }
    /// p(x, z) = p(z) p(x|z), indexed [x * nz + z].
    std::vector<double> p_joint() const {
        std::vector<double> j(nx * nz);
        for (std::size_t x = 0; x < nx; ++x)
            for (std::size_t z = 0; z < nz; ++z) j[x * nz + z] = p_z[z] * p(x, z);
        return j;
    }
    std::vector<double> q_marginal_z() const {
        std::vector<double> m(nz);
        for (std::size_t z = 0; z < nz; ++z) {
            CompensatedSum s;
            for (std::size_t x = 0; x < nx; ++x) s.add(p_data[x] * q(z, x));
            m[z] = s.value();
        }
        return m;
    }
    std::vector<double> p_marginal_x() const {
        std::vector<double> m(nx);
        for (std::size_t x = 0; x < nx; ++x) {
            CompensatedSum s;
            for (std::size_t z = 0; z < nz; ++z) s.add(p_z[z] * p(x, z));
            m[x] = s.value();
        }
        return m;
    }
    /// q(x|z) indexed [z * nx + x]; rows with q(z) = 0 are left at 0.
    std::vector<double> q_x_given_z() const {
        const auto qz = q_marginal_z();
        std::vector<double> out(nz * nx, 0.0);
        for (std::size_t z = 0; z < nz; ++z)
            if (qz[z] > 0.0)
                for (std::size_t x = 0; x < nx; ++x) out[z * nx + x] = p_data[x] * q(z, x) / qz[z];
        return out;
    }
    /// p_theta(z|x) indexed [x * nz + z]; rows with p(x) = 0 are left at 0.
    std::vector<double> p_z_given_x() const {
        const auto px = p_marginal_x();
        std::vector<double> out(nx * nz, 0.0);
        for (std::size_t x = 0; x < nx; ++x)
            if (px[x] > 0.0)
                for (std::size_t z = 0; z < nz; ++z) out[x * nz + z] = p_z[z] * p(x, z) / px[x];
        return out;
    }
};

/// KL(a || b) over n atoms; +inf marker on a support mismatch.
inline ExtReal kl(const double* a, const double* b, std::size_t n) {
    CompensatedSum s;
    for (std::size_t i = 0; i < n; ++i) {
        if (a[i] == 0.0) continue;
        if (b[i] == 0.0) return ExtReal::pos_inf();
        s.add(a[i] * (std::log(a[i]) - std::log(b[i])));
    }
    return s.value();
}
inline ExtReal kl(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ShapeError("kl: size mismatch");
    return kl(a.data(), b.data(), a.size());
}

inline double entropy(const std::vector<double>& p) {
    CompensatedSum s;
    for (double v : p)
        if (v > 0.0) s.add(-v * std::log(v));
    return s.value();
}

namespace detail {
/// sum_i w_i * f_i over extended reals, compensated on the finite part.
class ExtAccumulator {
public:
    void add(double weight, ExtReal term) {
        if (weight == 0.0) return;
        if (term.is_finite()) {
            s_.add(weight * term.value());
        } else {
            inf_ = inf_ + weight * term;
        }
    }
    ExtReal value() const { return inf_.is_finite() ? ExtReal(s_.value()) : inf_; }

private:
    CompensatedSum s_;
    ExtReal inf_ = 0.0;
};
}  // namespace detail

inline double entropy_data(const TabularJoint& j) { return entropy(j.p_data); }

/// I_q(x; z) under q(x, z) = p_D(x) q(z|x), in nats.
inline double mutual_information_exact(const TabularJoint& j) {
    const auto qz = j.q_marginal_z();
    CompensatedSum s;
    for (std::size_t x = 0; x < j.nx; ++x)
        for (std::size_t z = 0; z < j.nz; ++z) {
            const double qzx = j.q(z, x);
            if (j.p_data[x] == 0.0 || qzx == 0.0) continue;
            s.add(j.p_data[x] * qzx * (std::log(qzx) - std::log(qz[z])));
        }
    return s.value();
}

/// E_{p_D} E_{q(z|x)} [log p(x|z)].
inline ExtReal reconstruction(const TabularJoint& j) {
    CompensatedSum s;
    for (std::size_t x = 0; x < j.nx; ++x)
        for (std::size_t z = 0; z < j.nz; ++z) {
            const double w = j.p_data[x] * j.q(z, x);
            if (w == 0.0) continue;
            if (j.p(x, z) == 0.0) return ExtReal::neg_inf();
            s.add(w * std::log(j.p(x, z)));
        }
    return s.value();
}

/// E_{p_D} KL(q(z|x) || p(z)).
inline ExtReal mean_kl_posterior_prior(const TabularJoint& j) {
    detail::ExtAccumulator acc;
    for (std::size_t x = 0; x < j.nx; ++x) acc.add(j.p_data[x], kl(&j.q_z_given_x[x * j.nz], j.p_z.data(), j.nz));
    return acc.value();
}

/// E_{p_D} KL(q(z|x) || p_theta(z|x)): the mean variational gap.
inline ExtReal mean_variational_gap(const TabularJoint& j) {
    const auto post = j.p_z_given_x();
    detail::ExtAccumulator acc;
    for (std::size_t x = 0; x < j.nx; ++x) acc.add(j.p_data[x], kl(&j.q_z_given_x[x * j.nz], &post[x * j.nz], j.nz));
    return acc.value();
}

/// E_{q(z)} KL(q(x|z) || p_theta(x|z)).
inline ExtReal mean_decoder_gap(const TabularJoint& j) {
    const auto qz = j.q_marginal_z();
    const auto qxz = j.q_x_given_z();
    detail::ExtAccumulator acc;
    for (std::size_t z = 0; z < j.nz; ++z) acc.add(qz[z], kl(&qxz[z * j.nx], &j.p_x_given_z[z * j.nx], j.nx));
    return acc.value();
}

struct ElboForms {
    ExtReal form0;  // recon - E KL(q(z|x) || p(z))
    ExtReal form1;  // -KL(q(x,z) || p(x,z))
    ExtReal form2;  // -KL(p_D || p(x)) - E_{p_D} KL(q(z|x) || p(z|x))
    ExtReal form3;  // -KL(q(z) || p(z)) - E_{q(z)} KL(q(x|z) || p(x|z))
    double h_data;  // H(p_D)
};

/// form1 == form2 == form3 and form0 == form1 + E_{p_D}[log p_D] = form1 - h_data.
inline ElboForms elbo_forms(const TabularJoint& j) {
    ElboForms f;
    f.form0 = reconstruction(j) - mean_kl_posterior_prior(j);
    f.form1 = -kl(j.q_joint(), j.p_joint());
    f.form2 = -kl(j.p_data, j.p_marginal_x()) - mean_variational_gap(j);
    f.form3 = -kl(j.q_marginal_z(), j.p_z) - mean_decoder_gap(j);
    f.h_data = entropy_data(j);
    return f;
}

struct InfoVaeForms {
    ExtReal eq5;  // -lambda KL(q(z)||p(z)) - E_{q(z)} KL(q(x|z)||p(x|z)) + alpha I_q
    ExtReal eq6;  // recon - (1-alpha) E KL(q(z|x)||p(z)) - (alpha+lambda-1) KL(q(z)||p(z))
    double h_data;
};

/// eq5 == eq6 + h_data.
inline InfoVaeForms infovae_forms(const TabularJoint& j, double alpha, double lambda) {
    const ExtReal kl_marginal = kl(j.q_marginal_z(), j.p_z);
    InfoVaeForms f;
    f.eq5 = -(lambda * kl_marginal) - mean_decoder_gap(j) + ExtReal(alpha * mutual_information_exact(j));
    f.eq6 = reconstruction(j) - (1.0 - alpha) * mean_kl_posterior_prior(j) - (alpha + lambda - 1.0) * kl_marginal;
    f.h_data = entropy_data(j);
    return f;
}

/// Replace p_theta(x|z) by the Bayes posterior q(x|z) proportional to p_D(x) q(z|x);
/// rows with q(z) = 0 become uniform.
inline TabularJoint optimal_decoder_for_q(const TabularJoint& j) {
    TabularJoint out = j;
    const auto qz = j.q_marginal_z();
    out.p_x_given_z = j.q_x_given_z();
    for (std::size_t z = 0; z < j.nz; ++z)
        if (!(qz[z] > 0.0)) std::fill_n(out.p_x_given_z.begin() + static_cast<std::ptrdiff_t>(z * j.nx), j.nx, 1.0 / static_cast<double>(j.nx));
    return out;
}

/// T[x * nx + x'] = sum_z q(z|x) p(x'|z): one x -> z -> x' step of the chain.
inline std::vector<double> chain_transition_matrix(const TabularJoint& j) {
    std::vector<double> t(j.nx * j.nx);
    for (std::size_t x = 0; x < j.nx; ++x)
        for (std::size_t y = 0; y < j.nx; ++y) {
            CompensatedSum s;
            for (std::size_t z = 0; z < j.nz; ++z) s.add(j.q(z, x) * j.p(y, z));
            t[x * j.nx + y] = s.value();
        }
    return t;
}

/// A nonnegative matrix is primitive (irreducible and aperiodic) iff its
/// (n-1)^2 + 1 power is strictly positive.
inline bool is_primitive(const std::vector<double>& t, std::size_t n) {
    std::vector<char> a(n * n), r(n * n, 0);
    for (std::size_t i = 0; i < n * n; ++i) a[i] = t[i] > 0.0;
    for (std::size_t i = 0; i < n; ++i) r[i * n + i] = 1;
    auto mult = [n](const std::vector<char>& x, const std::vector<char>& y) {
        std::vector<char> o(n * n, 0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k)
                if (x[i * n + k])
                    for (std::size_t j = 0; j < n; ++j) o[i * n + j] |= y[k * n + j];
        return o;
    };
    std::size_t power = (n - 1) * (n - 1) + 1;
    while (power) {
        if (power & 1) r = mult(r, a);
        a = mult(a, a);
        power >>= 1;
    }
    return std::all_of(r.begin(), r.end(), [](char c) { return c != 0; });
}

struct StationaryResult {
    bool ergodic = false;
    std::vector<double> distribution;  // empty when not ergodic
    std::size_t iterations = 0;
};

/// Left eigenvector of T for eigenvalue 1 by power iteration (L1 change < tol).
inline StationaryResult stationary(const TabularJoint& j, double tol = 1e-12, std::size_t max_iter = 1000000) {
    const auto t = chain_transition_matrix(j);
    const std::size_t n = j.nx;
    StationaryResult res;
    if (!is_primitive(t, n)) return res;
    res.ergodic = true;
    std::vector<double> pi(n, 1.0 / static_cast<double>(n)), next(n);
    for (res.iterations = 1; res.iterations <= max_iter; ++res.iterations) {
        for (std::size_t y = 0; y < n; ++y) {
            CompensatedSum s;
            for (std::size_t x = 0; x < n; ++x) s.add(pi[x] * t[x * n + y]);
            next[y] = s.value();
        }
        CompensatedSum total;
        for (double v : next) total.add(v);
        double change = 0.0;
        for (std::size_t y = 0; y < n; ++y) {
            next[y] /= total.value();
            change += std::abs(next[y] - pi[y]);
        }
        pi.swap(next);
        if (change < tol) break;
    }
    res.distribution = std::move(pi);
    return res;
}

inline double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ShapeError("total_variation: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return 0.5 * s;
}

/// log Phi(-t) = log P(N(0,1) > t), accurate far into the tail.
inline double log_normal_upper_tail(double t) {
    if (t < 35.0) return std::log(0.5 * std::erfc(t / std::numbers::sqrt2));
    const double t2 = t * t;
    const double series = 1.0 - 1.0 / t2 + 3.0 / (t2 * t2) - 15.0 / (t2 * t2 * t2) + 105.0 / (t2 * t2 * t2 * t2);
    return -0.5 * t2 - std::log(t) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

/// Two-point data {-1, 1}, q(z|x=1) = N(c, lam^2) and a decoder that is
/// N(1, sigma^2) on z >= 0 and N(-1, sigma^2) on z < 0.
struct PathologyClosedForms {
    double tail;        // q(z < 0 | x = 1)
    double log_tail;
    double sigma_star;  // 2 sqrt(tail): maximizer of the reconstruction term over sigma
    double l_ae_star;   // reconstruction at sigma_star: -0.5 log(tail) - log 2 - 0.5 log(2 pi) - 0.5
    double l_reg;       // -KL(q(z|x=1) || p(z)) = log lam - lam^2/2 - c^2/2 + 1/2
    double elbo() const { return l_ae_star + l_reg; }
};

inline PathologyClosedForms pathology_closed_forms(double c, double lam) {
    if (!(lam > 0.0)) throw ConfigError("pathology_closed_forms: lam must be > 0");
    PathologyClosedForms f;
    f.log_tail = log_normal_upper_tail(c / lam);
    f.tail = std::exp(f.log_tail);
    f.sigma_star = 2.0 * std::exp(0.5 * f.log_tail);
    f.l_ae_star = -0.5 * f.log_tail - std::log(2.0) - 0.5 * std::log(2.0 * std::numbers::pi) - 0.5;
    f.l_reg = std::log(lam) - 0.5 * lam * lam - 0.5 * c * c + 0.5;
    return f;
}

/// Reconstruction term of the restricted family as a function of sigma.
inline double pathology_reconstruction(double sigma, double tail) {
    return -std::log(sigma) - 2.0 * tail / (sigma * sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
}

// ---- random joints ---------------------------------------------------------

inline std::vector<double> random_simplex(std::size_t n, Rng& rng) {
    std::gamma_distribution<double> g(1.0, 1.0);
    std::vector<double> v(n);
    double s;
    do {
        s = 0.0;
        for (auto& x : v) {
            x = g(rng) + 1e-3;
            s += x;
        }
    } while (!(s > 0.0));
    for (auto& x : v) x /= s;
    return v;
}

/// Strictly positive joint with Dirichlet(1)-like tables.
inline TabularJoint random_joint(std::size_t nx, std::size_t nz, Rng& rng) {
    TabularJoint j;
    j.nx = nx;
    j.nz = nz;
    j.p_z = random_simplex(nz, rng);
    j.p_data = random_simplex(nx, rng);
    for (std::size_t z = 0; z < nz; ++z) {
        auto row = random_simplex(nx, rng);
        j.p_x_given_z.insert(j.p_x_given_z.end(), row.begin(), row.end());
    }
    for (std::size_t x = 0; x < nx; ++x) {
        auto row = random_simplex(nz, rng);
        j.q_z_given_x.insert(j.q_z_given_x.end(), row.begin(), row.end());
    }
    return j;
}

// ---- optimum structure -----------------------------------------------------

/// eq6 with the decoder profiled out (Bayes decoder for the current q).
inline double profiled_eq6(const TabularJoint& j, double alpha, double lambda) {
    return infovae_forms(optimal_decoder_for_q(j), alpha, lambda).eq6.to_double();
}

struct CoordinateAscentResult {
    TabularJoint joint;  // with the Bayes decoder applied
    double objective;
    std::size_t sweeps;
};

namespace detail {
inline void softmax_rows(const std::vector<double>& logits, TabularJoint& t) {
    const std::size_t nx = t.nx, nz = t.nz;
    for (std::size_t x = 0; x < nx; ++x) {
        double m = 0.0;
        for (std::size_t z = 0; z < nz; ++z) m = std::max(m, logits[x * nz + z]);
        double s = 0.0;
        for (std::size_t z = 0; z < nz; ++z) s += std::exp(logits[x * nz + z] - m);
        for (std::size_t z = 0; z < nz; ++z) t.q_z_given_x[x * nz + z] = std::exp(logits[x * nz + z] - m) / s;
    }
}

// Golden-section sweeps over each free logit (column 0 is pinned at 0).
inline double coordinate_ascent(TabularJoint& j, std::vector<double>& logits, double alpha, double lambda, std::size_t sweeps,
                                double bound) {
    auto objective = [&] {
        softmax_rows(logits, j);
        return profiled_eq6(j, alpha, lambda);
    };
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    for (std::size_t sweep = 0; sweep < sweeps; ++sweep)
        for (std::size_t x = 0; x < j.nx; ++x)
            for (std::size_t z = 1; z < j.nz; ++z) {
                double& w = logits[x * j.nz + z];
                double lo = -bound, hi = bound;
                double a = hi - phi * (hi - lo), b = lo + phi * (hi - lo);
                w = a;
                double fa = objective();
                w = b;
                double fb = objective();
                for (int it = 0; it < 120; ++it) {
                    if (fa > fb) {
                        hi = b;
                        b = a;
                        fb = fa;
                        a = hi - phi * (hi - lo);
                        w = a;
                        fa = objective();
                    } else {
                        lo = a;
                        a = b;
                        fa = fb;
                        b = lo + phi * (hi - lo);
                        w = b;
                        fb = objective();
                    }
                }
                w = 0.5 * (lo + hi);
            }
    return objective();
}
}  // namespace detail

/// Coordinate ascent on eq6 (KL divergence) over q(z|x) in softmax-logit
/// coordinates, alternating with the closed-form optimal decoder. The first
/// start is the given q; `restarts` more begin from seeded random logits, and
/// the best end point is kept, since symmetric problems have local optima
/// (e.g. a permuted code).
inline CoordinateAscentResult maximize_eq6(TabularJoint j, double alpha, double lambda, std::size_t sweeps = 200,
                                           double logit_bound = 30.0, std::size_t restarts = 4, std::uint64_t seed = 1) {
    const std::size_t nx = j.nx, nz = j.nz;
    Rng rng = make_rng(seed, 0x6571366173ULL);
    std::uniform_real_distribution<double> init(-3.0, 3.0);
    std::optional<CoordinateAscentResult> best;
    for (std::size_t start = 0; start <= restarts; ++start) {
        std::vector<double> logits(nx * nz, 0.0);
        for (std::size_t x = 0; x < nx; ++x)
            for (std::size_t z = 1; z < nz; ++z)
                logits[x * nz + z] = start == 0 ? std::log(j.q(z, x)) - std::log(j.q(0, x)) : init(rng);
        TabularJoint work = j;
        const double value = detail::coordinate_ascent(work, logits, alpha, lambda, sweeps, logit_bound);
        if (!best || value > best->objective) best = CoordinateAscentResult{optimal_decoder_for_q(work), value, sweeps};
    }
    return *best;
}

/// Blocks of p(z) and p_D with mass 1/N each; q(z|x) = N p(z) on block A_i for
/// every x in block B_i. Then q(z) = p(z) and I_q = log N.
inline TabularJoint partition_construction(std::size_t blocks, std::size_t x_per_block, std::size_t z_per_block, Rng& rng) {
    if (blocks == 0 || x_per_block == 0 || z_per_block == 0) throw ConfigError("partition_construction: empty blocks");
    TabularJoint j;
    j.nx = blocks * x_per_block;
    j.nz = blocks * z_per_block;
    const double n = static_cast<double>(blocks);
    for (std::size_t b = 0; b < blocks; ++b) {
        for (double w : random_simplex(z_per_block, rng)) j.p_z.push_back(w / n);
        for (double w : random_simplex(x_per_block, rng)) j.p_data.push_back(w / n);
    }
    j.q_z_given_x.assign(j.nx * j.nz, 0.0);
    for (std::size_t x = 0; x < j.nx; ++x) {
        const std::size_t b = x / x_per_block;
        for (std::size_t z = b * z_per_block; z < (b + 1) * z_per_block; ++z) j.q_z_given_x[x * j.nz + z] = n * j.p_z[z];
    }
    j.p_x_given_z.assign(j.nz * j.nx, 0.0);
    return optimal_decoder_for_q(j);
}

// ---- identity corpus -------------------------------------------------------

struct IdentityReport {
    std::string identity;
    double max_abs_deviation = 0.0;
    std::size_t corpus_size = 0;
};

/// Checks the objective identities on `corpus_size` random joints with
/// nx, nz drawn uniformly from [2, 8].
inline std::vector<IdentityReport> run_identity_corpus(std::size_t corpus_size, std::uint64_t seed = 1) {
    std::vector<IdentityReport> r = {{"elbo_form1_eq_form2", 0.0, corpus_size},
                                     {"elbo_form1_eq_form3", 0.0, corpus_size},
                                     {"elbo_form0_eq_form1_plus_E_log_pD", 0.0, corpus_size},
                                     {"infovae_eq5_eq_eq6_plus_H", 0.0, corpus_size},
                                     {"ae_optimal_decoder_eq_I_minus_H", 0.0, corpus_size},
                                     {"chain_stationary_tv_to_p_data", 0.0, corpus_size},
                                     {"optimal_decoder_fixed_point", 0.0, corpus_size}};
    auto bump = [](IdentityReport& rep, double dev) {
        rep.max_abs_deviation = std::isfinite(dev) ? std::max(rep.max_abs_deviation, dev) : std::numeric_limits<double>::infinity();
    };
    const double alphas[] = {-1.0, 0.0, 0.5, 1.0};
    const double lambdas[] = {0.5, 1.0, 10.0};
    Rng rng = make_rng(seed, 0x7461626cULL);
    std::uniform_int_distribution<std::size_t> dim(2, 8);
    for (std::size_t k = 0; k < corpus_size; ++k) {
        const std::size_t nx = dim(rng), nz = dim(rng);
        const TabularJoint j = random_joint(nx, nz, rng);
        const ElboForms f = elbo_forms(j);
        bump(r[0], std::abs((f.form1 - f.form2).to_double()));
        bump(r[1], std::abs((f.form1 - f.form3).to_double()));
        bump(r[2], std::abs((f.form0 - (f.form1 - ExtReal(f.h_data))).to_double()));
        for (double a : alphas)
            for (double l : lambdas) {
                const InfoVaeForms g = infovae_forms(j, a, l);
                bump(r[3], std::abs((g.eq5 - g.eq6 - ExtReal(g.h_data)).to_double()));
            }
        const TabularJoint opt = optimal_decoder_for_q(j);
        bump(r[4], std::abs(reconstruction(opt).to_double() - (mutual_information_exact(opt) - entropy_data(opt))));
        const StationaryResult st = stationary(opt);
        bump(r[5], st.ergodic ? total_variation(st.distribution, opt.p_data) : std::numeric_limits<double>::infinity());
        const TabularJoint twice = optimal_decoder_for_q(opt);
        double fp = 0.0;
        for (std::size_t i = 0; i < twice.p_x_given_z.size(); ++i)
            fp = std::max(fp, std::abs(twice.p_x_given_z[i] - opt.p_x_given_z[i]));
        bump(r[6], fp);
    }
    return r;
}

}  // namespace infovae::tabular
