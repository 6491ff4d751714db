#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace infovae;
using namespace infovae::tabular;

namespace {
TabularJoint joint(std::uint64_t seed, std::size_t nx, std::size_t nz) {
    Rng rng = make_rng(seed, 2);
    return random_joint(nx, nz, rng);
}

// Re-summations in a different loop order from the library.
double brute_mi(const TabularJoint& j) {
    std::vector<double> qz(j.nz, 0.0);
    for (std::size_t z = 0; z < j.nz; ++z)
        for (std::size_t x = 0; x < j.nx; ++x) qz[z] += j.p_data[x] * j.q_z_given_x[x * j.nz + z];
    double s = 0.0;
    for (std::size_t z = 0; z < j.nz; ++z)
        for (std::size_t x = 0; x < j.nx; ++x) {
            const double q = j.q_z_given_x[x * j.nz + z];
            if (q > 0.0) s += j.p_data[x] * q * std::log(q / qz[z]);
        }
    return s;
}

double brute_neg_joint_kl(const TabularJoint& j) {
    double s = 0.0;
    for (std::size_t z = 0; z < j.nz; ++z)
        for (std::size_t x = 0; x < j.nx; ++x) {
            const double q = j.p_data[x] * j.q_z_given_x[x * j.nz + z];
            const double p = j.p_z[z] * j.p_x_given_z[z * j.nx + x];
            if (q > 0.0) s -= q * std::log(q / p);
        }
    return s;
}

TabularJoint bijective(std::size_t n) {
    TabularJoint j;
    j.nx = j.nz = n;
    j.p_z.assign(n, 1.0 / n);
    j.p_data.assign(n, 1.0 / n);
    j.q_z_given_x.assign(n * n, 0.0);
    j.p_x_given_z.assign(n * n, 1.0 / n);
    for (std::size_t i = 0; i < n; ++i) j.q_z_given_x[i * n + (n - 1 - i)] = 1.0;
    return j;
}
}  // namespace

TEST(TabularJoint, ValidatesNormalization) {
    TabularJoint j = joint(1, 3, 2);
    EXPECT_NO_THROW(j.validate());
    j.p_z[0] += 1e-6;
    EXPECT_THROW(j.validate(), ConfigError);
    j = joint(1, 3, 2);
    j.q_z_given_x[0] = -0.1;
    EXPECT_THROW(j.validate(), ConfigError);
}

TEST(TabularJoint, RandomJointsAreNormalized) {
    for (std::uint64_t s = 0; s < 50; ++s) {
        const TabularJoint j = joint(s, 2 + s % 7, 2 + (s / 7) % 7);
        double pz = 0.0, pd = 0.0;
        for (double v : j.p_z) pz += v;
        for (double v : j.p_data) pd += v;
        EXPECT_NEAR(pz, 1.0, 1e-12);
        EXPECT_NEAR(pd, 1.0, 1e-12);
        for (std::size_t x = 0; x < j.nx; ++x) {
            double r = 0.0;
            for (std::size_t z = 0; z < j.nz; ++z) {
                EXPECT_GE(j.q(z, x), 0.0);
                r += j.q(z, x);
            }
            EXPECT_NEAR(r, 1.0, 1e-12);
        }
    }
}

TEST(ElboForms, AgreeOnRandomJoint) {
    const TabularJoint j = joint(7, 4, 3);
    const ElboForms f = elbo_forms(j);
    EXPECT_LT(std::abs(f.form1.value() - f.form2.value()), 1e-9);
    EXPECT_LT(std::abs(f.form1.value() - f.form3.value()), 1e-9);
    double neg_entropy = 0.0;
    for (double p : j.p_data) neg_entropy += p * std::log(p);
    // form0 carries the data entropy: form0 - form1 = sum p_D log p_D = -H(p_D)
    EXPECT_NEAR(f.form0.value() - f.form1.value(), neg_entropy, 1e-9);
    EXPECT_NEAR(f.form1.value(), brute_neg_joint_kl(j), 1e-12);
}

TEST(ElboForms, GlobalOptimumConstruction) {
    TabularJoint j = joint(8, 4, 3);
    for (std::size_t x = 0; x < j.nx; ++x)
        for (std::size_t z = 0; z < j.nz; ++z) j.q_z_given_x[x * j.nz + z] = j.p_z[z];
    for (std::size_t z = 0; z < j.nz; ++z)
        for (std::size_t x = 0; x < j.nx; ++x) j.p_x_given_z[z * j.nx + x] = j.p_data[x];
    const ElboForms f = elbo_forms(j);
    EXPECT_NEAR(f.form1.value(), 0.0, 1e-15);
    EXPECT_NEAR(mean_kl_posterior_prior(j).value(), 0.0, 1e-15);
    EXPECT_NEAR(mean_variational_gap(j).value(), 0.0, 1e-15);
    EXPECT_NEAR(mutual_information_exact(j), 0.0, 1e-15);
}

TEST(ElboForms, MismatchedSupportGivesNegativeInfinity) {
    TabularJoint j = bijective(2);
    j.p_x_given_z = {1.0, 0.0, 1.0, 0.0};  // decoder never produces x = 1
    const ElboForms f = elbo_forms(j);
    EXPECT_TRUE(f.form1.is_neg_inf());
    EXPECT_TRUE(f.form0.is_neg_inf());
    EXPECT_TRUE(reconstruction(j).is_neg_inf());
}

TEST(InfoVaeForms, Eq5IsEq6PlusEntropy) {
    const TabularJoint j = joint(9, 5, 4);
    const InfoVaeForms f = infovae_forms(j, 0.5, 2.0);
    EXPECT_LT(std::abs(f.eq5.value() - f.eq6.value() - f.h_data), 1e-9);
}

TEST(InfoVaeForms, CollapsesToElbo) {
    const TabularJoint j = joint(10, 3, 5);
    EXPECT_NEAR(infovae_forms(j, 0.0, 1.0).eq6.value(), elbo_forms(j).form0.value(), 1e-12);
}

TEST(InfoVaeForms, AaeStructure) {
    const TabularJoint j = joint(11, 4, 4);
    const double expected = reconstruction(j).value() - kl(j.q_marginal_z(), j.p_z).value();
    EXPECT_NEAR(infovae_forms(j, 1.0, 1.0).eq6.value(), expected, 1e-12);
}

TEST(MutualInformation, IndependentEncoderGivesZero) {
    TabularJoint j = joint(12, 4, 3);
    for (std::size_t x = 1; x < j.nx; ++x)
        for (std::size_t z = 0; z < j.nz; ++z) j.q_z_given_x[x * j.nz + z] = j.q_z_given_x[z];
    EXPECT_NEAR(mutual_information_exact(j), 0.0, 1e-15);
}

TEST(MutualInformation, PerfectCode) {
    const TabularJoint j = bijective(2);
    EXPECT_NEAR(mutual_information_exact(j), std::log(2.0), 1e-15);
    EXPECT_NEAR(entropy_data(j), std::log(2.0), 1e-15);
}

TEST(MutualInformation, MatchesBruteForce) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const TabularJoint j = joint(100 + s, 2 + s % 7, 2 + s % 5);
        EXPECT_LT(std::abs(mutual_information_exact(j) - brute_mi(j)), 1e-12);
    }
}

TEST(OptimalDecoder, AutoencoderObjectiveIsInformationMinusEntropy) {
    const TabularJoint j = optimal_decoder_for_q(joint(13, 6, 4));
    EXPECT_NEAR(reconstruction(j).value(), mutual_information_exact(j) - entropy_data(j), 1e-12);
}

TEST(OptimalDecoder, BijectionIsInverted) {
    const TabularJoint j = optimal_decoder_for_q(bijective(3));
    for (std::size_t z = 0; z < 3; ++z)
        for (std::size_t x = 0; x < 3; ++x) EXPECT_NEAR(j.p(x, z), x == 2 - z ? 1.0 : 0.0, 1e-15);
}

TEST(OptimalDecoder, RowsSumToOne) {
    TabularJoint j = joint(14, 4, 5);
    for (std::size_t x = 0; x < j.nx; ++x) {  // code 4 is never used
        double r = 0.0;
        for (std::size_t z = 0; z < 4; ++z) r += j.q_z_given_x[x * j.nz + z];
        j.q_z_given_x[x * j.nz + 4] = 0.0;
        for (std::size_t z = 0; z < 4; ++z) j.q_z_given_x[x * j.nz + z] /= r;
    }
    const TabularJoint o = optimal_decoder_for_q(j);
    for (std::size_t z = 0; z < o.nz; ++z) {
        double r = 0.0;
        for (std::size_t x = 0; x < o.nx; ++x) r += o.p(x, z);
        EXPECT_NEAR(r, 1.0, 1e-12);
    }
}

TEST(Chain, OptimalDecoderIsStationaryAtData) {
    const TabularJoint j = optimal_decoder_for_q(joint(15, 5, 3));
    const auto st = stationary(j);
    ASSERT_TRUE(st.ergodic);
    EXPECT_LT(total_variation(st.distribution, j.p_data), 1e-10);
}

TEST(Chain, DecoderIndependentOfZMixesInOneStep) {
    TabularJoint j = joint(16, 4, 3);
    for (std::size_t z = 1; z < j.nz; ++z)
        for (std::size_t x = 0; x < j.nx; ++x) j.p_x_given_z[z * j.nx + x] = j.p_x_given_z[x];
    const auto t = chain_transition_matrix(j);
    for (std::size_t x = 0; x < j.nx; ++x)
        for (std::size_t y = 0; y < j.nx; ++y) EXPECT_NEAR(t[x * j.nx + y], j.p_x_given_z[y], 1e-15);
    const auto st = stationary(j);
    ASSERT_TRUE(st.ergodic);
    for (std::size_t y = 0; y < j.nx; ++y) EXPECT_NEAR(st.distribution[y], j.p_x_given_z[y], 1e-12);
    EXPECT_LE(st.iterations, 2u);
}

TEST(Chain, DisconnectedCodesAreNotErgodic) {
    Rng rng = make_rng(17);
    const TabularJoint j = partition_construction(2, 2, 2, rng);
    EXPECT_FALSE(stationary(j).ergodic);
    EXPECT_FALSE(is_primitive(chain_transition_matrix(j), j.nx));
}

TEST(Chain, PeriodicChainIsNotPrimitive) {
    EXPECT_FALSE(is_primitive({0.0, 1.0, 1.0, 0.0}, 2));
    EXPECT_TRUE(is_primitive({0.5, 0.5, 1.0, 0.0}, 2));
}

TEST(PathologyClosedForms, SymmetricEncoder) {
    const auto f = pathology_closed_forms(0.0, 1.0);
    EXPECT_DOUBLE_EQ(f.tail, 0.5);
    EXPECT_NEAR(f.sigma_star, std::sqrt(2.0), 1e-15);
}

TEST(PathologyClosedForms, SigmaStarMaximizesReconstruction) {
    const auto f = pathology_closed_forms(3.0, 0.5);
    double lo = 1e-12, hi = 10.0;
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    // search in log sigma
    double a = std::log(lo), b = std::log(hi);
    for (int i = 0; i < 300; ++i) {
        const double c = b - phi * (b - a), d = a + phi * (b - a);
        if (pathology_reconstruction(std::exp(c), f.tail) > pathology_reconstruction(std::exp(d), f.tail))
            b = d;
        else
            a = c;
    }
    EXPECT_NEAR(std::exp(0.5 * (a + b)), f.sigma_star, 1e-3 * f.sigma_star + 1e-12);
    EXPECT_NEAR(pathology_reconstruction(f.sigma_star, f.tail), f.l_ae_star, 1e-9);
}

TEST(PathologyClosedForms, ElboDivergesAlongFixedRatioPath) {
    const double at5 = pathology_closed_forms(5.0, 1.0 / 5.0).elbo();
    const double at10 = pathology_closed_forms(10.0, 1.0 / 10.0).elbo();
    EXPECT_GT(at10, at5);
    EXPECT_GT(pathology_closed_forms(40.0, 1.0 / 40.0).elbo(), at10);
    EXPECT_TRUE(std::isfinite(pathology_closed_forms(100.0, 0.01).log_tail));
}

TEST(PathologyClosedForms, TailSeriesIsContinuous) {
    EXPECT_NEAR(log_normal_upper_tail(34.999999), log_normal_upper_tail(35.0), 1e-4);
    EXPECT_THROW(pathology_closed_forms(1.0, 0.0), ConfigError);
}

TEST(Optimum, CoordinateAscentRecoversDataAndPrior) {
    TabularJoint j;
    j.nx = j.nz = 2;
    j.p_data = {0.3, 0.7};
    j.p_z = {0.3, 0.7};
    j.q_z_given_x = {0.5, 0.5, 0.5, 0.5};
    j.p_x_given_z = {0.5, 0.5, 0.5, 0.5};
    const double alpha = 0.5, lambda = 2.0;
    const auto r = maximize_eq6(j, alpha, lambda);
    const TabularJoint& o = r.joint;
    EXPECT_LT(kl(o.q_marginal_z(), o.p_z).value(), 1e-6);
    EXPECT_LT(total_variation(o.p_marginal_x(), o.p_data), 1e-4);
    EXPECT_LT(mean_variational_gap(o).value(), 1e-4);
    // optimum: alpha I - H with I at its maximum H(p_D)
    const double h = entropy_data(o);
    EXPECT_NEAR(r.objective, alpha * h - h, 1e-4);
}

TEST(Optimum, PartitionConstructionMatchesPriorWithLogNInformation) {
    Rng rng = make_rng(18);
    const TabularJoint j = partition_construction(3, 2, 4, rng);
    EXPECT_NO_THROW(j.validate(1e-12));
    EXPECT_LT(total_variation(j.q_marginal_z(), j.p_z), 1e-12);
    EXPECT_NEAR(mutual_information_exact(j), std::log(3.0), 1e-12);
    EXPECT_LT(total_variation(j.p_marginal_x(), j.p_data), 1e-12);
    EXPECT_NEAR(mean_variational_gap(j).value(), 0.0, 1e-12);
}

TEST(IdentityCorpus, AllIdentitiesHold) {
    const auto reports = run_identity_corpus(200, 3);
    EXPECT_EQ(reports.size(), 7u);
    for (const auto& r : reports) {
        EXPECT_EQ(r.corpus_size, 200u);
        EXPECT_LT(r.max_abs_deviation, 1e-9) << r.identity;
    }
}

TEST(TabularModel, DensitiesMatchTables) {
    const TabularJoint j = joint(19, 3, 4);
    const TabularModel m(j);
    const Tensor x = Tensor::matrix(2, 1, {2.0, 0.0});
    const Tensor z = Tensor::matrix(2, 1, {1.0, 3.0});
    EXPECT_NEAR(m.log_likelihood(x, z)[0], std::log(j.p(2, 1)), 1e-15);
    EXPECT_NEAR(m.log_posterior(z, x)[1], std::log(j.q(3, 0)), 1e-15);
    EXPECT_NEAR(m.log_prior(z)[1], std::log(j.p_z[3]), 1e-15);
    EXPECT_THROW(m.log_prior(Tensor::matrix(1, 1, {4.0})), ShapeError);
}
