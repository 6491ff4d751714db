#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "infovae/divergences.hpp"

using namespace infovae;

namespace {
KernelSpec unit_kernel() { return KernelSpec{{1.0}}; }

// Direct triple-sum evaluation of the biased statistic.
double mmd_reference(const Tensor& q, const Tensor& p, const KernelSpec& k) {
    const std::size_t d = q.cols();
    auto row = [d](const Tensor& t, std::size_t r) { return t.values().subspan(r * d, d); };
    auto avg = [&](const Tensor& a, const Tensor& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.rows(); ++i)
            for (std::size_t j = 0; j < b.rows(); ++j) s += k(row(a, i), row(b, j));
        return s / static_cast<double>(a.rows() * b.rows());
    };
    return avg(p, p) - 2.0 * avg(q, p) + avg(q, q);
}
}  // namespace

TEST(Kernel, RejectsNonPositiveBandwidth) {
    EXPECT_THROW(KernelSpec({0.0}).validate(), ConfigError);
    EXPECT_THROW(KernelSpec{std::vector<double>{}}.validate(), ConfigError);
}

TEST(Kernel, DefaultScalesWithDimension) {
    const auto k = default_kernel(4);
    ASSERT_EQ(k.bandwidths.size(), 5u);
    EXPECT_DOUBLE_EQ(k.bandwidths[2], 2.0);
}

TEST(Mmd, IdenticalSetsGiveZero) {
    Rng rng = make_rng(1);
    const Tensor z = standard_normal(rng, 50, 3);
    EXPECT_NEAR(mmd_vstat(z, z, default_kernel(3)).item(), 0.0, 1e-12);
}

TEST(Mmd, SinglePoints) {
    const double v = mmd_vstat(Tensor::matrix(1, 1, {0.0}), Tensor::matrix(1, 1, {2.0}), unit_kernel()).item();
    EXPECT_NEAR(v, 2.0 - 2.0 * std::exp(-2.0), 1e-12);
    EXPECT_NEAR(v, 1.729329, 1e-6);
}

TEST(Mmd, MatchesTripleSum) {
    Rng rng = make_rng(2);
    const Tensor q = standard_normal(rng, 17, 2);
    const Tensor p = uniform(rng, 23, 2, -2.0, 2.0);
    const auto k = default_kernel(2);
    EXPECT_NEAR(mmd_vstat(q, p, k).item(), mmd_reference(q, p, k), 1e-12);
}

TEST(Mmd, SameDistributionIsSmall) {
    std::vector<double> values;
    for (std::uint64_t s = 0; s < 100; ++s) {
        Rng rng = make_rng(s, 77);
        values.push_back(mmd_vstat(standard_normal(rng, 500, 1), standard_normal(rng, 500, 1), unit_kernel()).item());
    }
    std::sort(values.begin(), values.end());
    EXPECT_LT(values[94], 0.02);
    EXPECT_GE(values.front(), 0.0);
}

TEST(Mmd, NonnegativeAndDetectsShift) {
    Rng rng = make_rng(3);
    for (int t = 0; t < 20; ++t) {
        const Tensor q = standard_normal(rng, 30, 2);
        const Tensor p = standard_normal(rng, 40, 2);
        EXPECT_GE(mmd_vstat(q, p, default_kernel(2)).item(), -1e-12);
    }
    const Tensor a = standard_normal(rng, 200, 2);
    const Tensor b = standard_normal(rng, 200, 2) + 2.0;
    EXPECT_GT(mmd_vstat(a, b, unit_kernel()).item(), 0.3);
}

TEST(Mmd, GradientCheck) {
    Rng rng = make_rng(4);
    const Tensor p = standard_normal(rng, 6, 2);
    const Tensor q = standard_normal(rng, 6, 2);
    EXPECT_LT(grad_check([&](const Tensor& z) { return mmd_vstat(z, p, default_kernel(2)); }, q), 1e-4);
}

TEST(Mmd, ShapeMismatchThrows) {
    EXPECT_THROW(mmd_vstat(Tensor::zeros({3, 2}), Tensor::zeros({3, 1}), unit_kernel()), ShapeError);
}

TEST(Stein, ParticleAtModeIsStationary) {
    const Tensor phi = stein_phi_star(Tensor::matrix(1, 1, {0.0}), standard_normal_score, unit_kernel());
    EXPECT_NEAR(phi.item(), 0.0, 1e-15);
}

TEST(Stein, SingleParticlePointsToMode) {
    const Tensor phi = stein_phi_star(Tensor::matrix(1, 1, {2.0}), standard_normal_score, unit_kernel());
    EXPECT_NEAR(phi.item(), -2.0, 1e-15);
}

TEST(Stein, SymmetricPairIsAntisymmetric) {
    const Tensor phi = stein_phi_star(Tensor::matrix(2, 1, {0.8, -0.8}), standard_normal_score, default_kernel(1));
    EXPECT_NEAR(phi[0], -phi[1], 1e-14);
}

TEST(Stein, DescentStepMovesTowardMode) {
    const double eps = 0.1;
    Tape tape;
    const Tensor z = tape.variable(Tensor::matrix(1, 1, {2.0}));
    const Tensor phi = stein_phi_star(z.detached(), standard_normal_score, unit_kernel());
    const double g = tape.backward(stein_surrogate_loss(z, phi)).of(z).item();
    const double moved = 2.0 - eps * g;
    EXPECT_NEAR(moved, 1.8, 1e-12);
    EXPECT_LT(std::abs(moved), 2.0);
}

TEST(Stein, SymmetricConfigurationHasZeroNetGradient) {
    Tape tape;
    const Tensor z = tape.variable(Tensor::matrix(4, 1, {-1.5, -0.5, 0.5, 1.5}));
    const Tensor phi = stein_phi_star(z.detached(), standard_normal_score, default_kernel(1));
    const Tensor g = tape.backward(stein_surrogate_loss(z, phi)).of(z);
    double net = 0.0;
    for (double v : g.values()) net += v;
    EXPECT_NEAR(net, 0.0, 1e-12);
}

TEST(Stein, SurrogateGradientIsMinusPhiOverN) {
    Rng rng = make_rng(6);
    Tape tape;
    const Tensor z = tape.variable(standard_normal(rng, 7, 3));
    const Tensor phi = stein_phi_star(z.detached(), standard_normal_score, default_kernel(3));
    const Tensor g = tape.backward(stein_surrogate_loss(z, phi)).of(z);
    for (std::size_t i = 0; i < g.numel(); ++i) EXPECT_NEAR(g[i], -phi[i] / 7.0, 1e-10);
}

TEST(Stein, RepeatedStepsApproachPrior) {
    Rng rng = make_rng(8);
    std::vector<double> z = standard_normal(rng, 100, 1).to_vector();
    for (auto& v : z) v = 3.0 + 0.3 * v;
    for (int it = 0; it < 1500; ++it) {
        const Tensor phi = stein_phi_star(Tensor::matrix(100, 1, z), standard_normal_score, default_kernel(1));
        for (std::size_t i = 0; i < z.size(); ++i) z[i] += 0.05 * phi[i];
    }
    double m = 0.0, v = 0.0;
    for (double x : z) m += x / 100.0;
    for (double x : z) v += (x - m) * (x - m) / 100.0;
    EXPECT_NEAR(m, 0.0, 0.1);
    EXPECT_NEAR(v, 1.0, 0.25);
}

TEST(Adversarial, ZeroWeightDiscriminatorIsUninformative) {
    Rng rng = make_rng(9);
    Discriminator d = Discriminator::create(2, rng);
    d.net.zero_output_layer();
    const auto l = adversarial_divergence(standard_normal(rng, 10, 2), standard_normal(rng, 10, 2), d);
    EXPECT_NEAR(l.disc_loss.item(), std::log(2.0), 1e-12);
    EXPECT_NEAR(l.gen_loss.item(), std::log(2.0), 1e-12);
}

TEST(Adversarial, SeparatingDiscriminatorGivesLargeGeneratorLoss) {
    Discriminator d;
    d.net.layers.push_back(Linear{Tensor::matrix(1, 1, {-10.0}), Tensor::vector({50.0}), std::nullopt});
    const Tensor zq = Tensor::matrix(3, 1, {10.0, 11.0, 12.0});
    const Tensor zp = Tensor::matrix(3, 1, {-0.5, 0.0, 0.5});
    const auto l = adversarial_divergence(zq, zp, d);
    EXPECT_GT(l.gen_loss.item(), 5.0);
    EXPECT_TRUE(std::isfinite(l.gen_loss.item()));
    EXPECT_DOUBLE_EQ(discriminator_accuracy(d, zq, zp), 1.0);
}

TEST(Adversarial, GradientsFlowToTheRightSide) {
    Rng rng = make_rng(10);
    const Discriminator d = Discriminator::create(2, rng);
    Tape tape;
    const Discriminator bound = attach(d, tape);
    const Tensor zq = tape.variable(standard_normal(rng, 5, 2));
    const Tensor zp = standard_normal(rng, 5, 2);
    const auto l = adversarial_divergence(zq, zp, bound);
    const auto gd = tape.backward(l.disc_loss);
    const Tensor disc_to_zq = gd.of(zq);
    for (double v : disc_to_zq.values()) EXPECT_EQ(v, 0.0);
    const auto gg = tape.backward(l.gen_loss);
    Discriminator probe = bound;
    for (Tensor* p : probe.parameters()) {
        const Tensor g = gg.of(*p);
        for (double v : g.values()) EXPECT_EQ(v, 0.0);
    }
    double norm = 0.0;
    const Tensor gen_to_zq = gg.of(zq);
    for (double v : gen_to_zq.values()) norm += v * v;
    EXPECT_GT(norm, 0.0);
}

TEST(Adversarial, SameDistributionGivesChanceAccuracy) {
    Rng rng = make_rng(11);
    Discriminator d = Discriminator::create(2, rng);
    TrainState st;
    for (int i = 0; i < 300; ++i) train_discriminator_step(d, st, standard_normal(rng, 64, 2), standard_normal(rng, 64, 2));
    const double acc = discriminator_accuracy(d, standard_normal(rng, 500, 2), standard_normal(rng, 500, 2));
    EXPECT_NEAR(acc, 0.5, 0.05);
}

TEST(Adversarial, LearnsToSeparateShiftedSamples) {
    Rng rng = make_rng(12);
    Discriminator d = Discriminator::create(2, rng);
    TrainState st;
    for (int i = 0; i < 300; ++i)
        train_discriminator_step(d, st, standard_normal(rng, 64, 2) + 3.0, standard_normal(rng, 64, 2));
    EXPECT_GT(discriminator_accuracy(d, standard_normal(rng, 500, 2) + 3.0, standard_normal(rng, 500, 2)), 0.9);
}
