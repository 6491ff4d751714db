#include <gtest/gtest.h>

#include <cmath>

#include "infovae/autodiff.hpp"
#include "infovae/random.hpp"

using namespace infovae;

TEST(Tensor, RejectsShapeValueMismatch) {
    EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5, 0.0)), ShapeError);
    EXPECT_THROW(Tensor({0}, {}), ShapeError);
}

TEST(Forward, ElementwiseAdd) {
    const Tensor y = add(Tensor::vector({1, 2}), Tensor::vector({3, 4}));
    EXPECT_EQ(y.to_vector(), (std::vector<double>{4, 6}));
}

TEST(Forward, IdentityMatmul) {
    const Tensor eye = Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    const Tensor a = Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6});
    EXPECT_EQ(matmul(eye, a).to_vector(), a.to_vector());
}

TEST(Forward, LogInvertsExp) {
    EXPECT_NEAR(log(exp(Tensor::scalar(0.7))).item(), 0.7, 1e-12);
}

TEST(Forward, MismatchedShapesThrow) {
    EXPECT_THROW(add(Tensor::vector({1, 2}), Tensor::vector({1, 2, 3})), ShapeError);
    EXPECT_THROW(matmul(Tensor::matrix(2, 3, std::vector<double>(6, 1.0)), Tensor::matrix(2, 3, std::vector<double>(6, 1.0))),
                 ShapeError);
}

TEST(Forward, RowBroadcast) {
    const Tensor a = Tensor::matrix(2, 2, {1, 2, 3, 4});
    const Tensor b = Tensor::matrix(1, 2, {10, 20});
    EXPECT_EQ(add(a, b).to_vector(), (std::vector<double>{11, 22, 13, 24}));
}

TEST(Forward, LogsumexpRowsIsStable) {
    const Tensor a = Tensor::matrix(1, 2, {1000.0, 1000.0});
    EXPECT_NEAR(logsumexp_rows(a).item(), 1000.0 + std::log(2.0), 1e-9);
}

TEST(Backward, SquareAtThree) {
    Tape tape;
    const Tensor x = tape.variable(Tensor::scalar(3.0));
    const Tensor y = square(x);
    EXPECT_DOUBLE_EQ(tape.backward(y).of(x).item(), 6.0);
}

TEST(Backward, ConstantHasZeroGradient) {
    Tape tape;
    const Tensor x = tape.variable(Tensor::vector({1.0, -2.0}));
    const Tensor c = tape.variable(Tensor::scalar(5.0));
    const Tensor y = c * 2.0;
    const Tensor g = tape.backward(y).of(x);
    for (double v : g.values()) EXPECT_EQ(v, 0.0);
}

TEST(Backward, GradientShapeMatchesValues) {
    Tape tape;
    const Tensor w = tape.variable(Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6}));
    const Tensor x = Tensor::matrix(4, 3, std::vector<double>(12, 0.5));
    const Tensor y = sum(tanh(matmul(x, w)));
    EXPECT_EQ(tape.backward(y).of(w).shape(), w.shape());
}

TEST(Backward, RootMustBeScalar) {
    Tape tape;
    const Tensor x = tape.variable(Tensor::vector({1.0, 2.0}));
    EXPECT_THROW(tape.backward(x * 2.0), ShapeError);
}

TEST(Backward, CanRunTwiceOnOneTape) {
    Tape tape;
    const Tensor x = tape.variable(Tensor::scalar(2.0));
    const Tensor a = square(x);
    const Tensor b = exp(x);
    EXPECT_DOUBLE_EQ(tape.backward(a).of(x).item(), 4.0);
    EXPECT_NEAR(tape.backward(b).of(x).item(), std::exp(2.0), 1e-12);
}

TEST(Backward, DetachedBlocksGradient) {
    Tape tape;
    const Tensor x = tape.variable(Tensor::scalar(2.0));
    const Tensor y = x * x.detached();
    EXPECT_DOUBLE_EQ(tape.backward(y).of(x).item(), 2.0);
}

TEST(GradCheck, SumTanh) {
    const Tensor x = Tensor::vector({-1.3, 0.2, 0.9, 2.1});
    EXPECT_LT(grad_check([](const Tensor& t) { return sum(tanh(t)); }, x), 1e-4);
}

TEST(GradCheck, QuadraticForm) {
    const Tensor a = Tensor::matrix(3, 3, {2, 0.5, 0, 0.5, 3, 0.1, 0, 0.1, 1});
    const Tensor x = Tensor::matrix(1, 3, {0.3, -0.7, 1.2});
    auto f = [&](const Tensor& t) { return sum(matmul(t, a) * t); };
    EXPECT_LT(grad_check(f, x), 1e-6);
}

TEST(GradCheck, ConstantFunction) {
    const Tensor x = Tensor::vector({1.0, 2.0});
    EXPECT_EQ(grad_check([](const Tensor&) { return Tensor::scalar(4.0); }, x), 0.0);
}

TEST(GradCheck, EveryOp) {
    Rng rng = make_rng(3);
    const Tensor a = uniform(rng, 3, 4, 0.5, 1.5);
    const Tensor b = uniform(rng, 3, 4, 0.5, 1.5);
    const Tensor w = uniform(rng, 4, 2, -1.0, 1.0);
    const std::vector<std::function<Tensor(const Tensor&)>> fs = {
        [&](const Tensor& t) { return sum(t * b - t / b + t - b); },
        [&](const Tensor& t) { return mean(softplus(t) + sigmoid(t) + log(t) + exp(t)); },
        [&](const Tensor& t) { return sum(square(matmul(t, w))); },
        [&](const Tensor& t) { return sum(transpose(t) * transpose(b)); },
        [&](const Tensor& t) { return sum(logsumexp_rows(t)); },
        [&](const Tensor& t) { return sum(row_sum(t) * row_sum(t)); },
        [&](const Tensor& t) { return sum(concat_cols(slice_cols(t, 0, 2), slice_cols(t, 2, 4)) * b); },
        [&](const Tensor& t) { return sum(slice_rows(t, 1, 3)); },
        [&](const Tensor& t) { return sum(pairwise_sq_dist(t, b)); },
        [&](const Tensor& t) { return sum(clamp(t, 0.8, 1.2)); },
    };
    for (std::size_t i = 0; i < fs.size(); ++i) EXPECT_LT(grad_check(fs[i], a), 1e-4) << "function " << i;
}

TEST(GradCheck, NonFiniteThrows) {
    EXPECT_THROW(grad_check([](const Tensor& t) { return sum(log(t)); }, Tensor::vector({-1.0})), NumericError);
}
