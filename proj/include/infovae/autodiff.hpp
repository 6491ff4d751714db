#pragma once

// Reverse-mode automatic differentiation over dense row-major float64 tensors.
//
// A Tensor is an immutable value (shape + shared buffer) that may be attached
// to a Tape. Operations on attached tensors append a node to the tape; the
// tape is rebuilt for every training step.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "infovae/errors.hpp"

namespace infovae {

using Shape = std::vector<std::size_t>;

inline std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

inline std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

class Tape;

class Tensor {
public:
    static constexpr std::size_t kDetached = std::numeric_limits<std::size_t>::max();

    Tensor() : Tensor(Shape{1}, std::vector<double>{0.0}) {}

    Tensor(Shape shape, std::vector<double> values)
        : shape_(std::move(shape)),
          data_(std::make_shared<const std::vector<double>>(std::move(values))) {
        if (shape_.empty()) throw ShapeError("tensor: empty shape");
        for (auto d : shape_)
            if (d == 0) throw ShapeError("tensor: zero-sized dimension in " + to_string(shape_));
        if (shape_numel(shape_) != data_->size())
            throw ShapeError("tensor: shape " + to_string(shape_) + " does not match " +
                             std::to_string(data_->size()) + " values");
    }

    static Tensor scalar(double v) { return Tensor(Shape{1}, {v}); }
    static Tensor vector(std::vector<double> v) {
        const auto n = v.size();
        return Tensor(Shape{n}, std::move(v));
    }
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
        return Tensor(Shape{rows, cols}, std::move(v));
    }
    static Tensor full(Shape shape, double v) {
        const auto n = shape_numel(shape);
        return Tensor(std::move(shape), std::vector<double>(n, v));
    }
    static Tensor zeros(Shape shape) { return full(std::move(shape), 0.0); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const { return data_->size(); }
    std::size_t rows() const { return rank() == 1 ? 1 : shape_[0]; }
    std::size_t cols() const { return rank() == 1 ? shape_[0] : numel() / shape_[0]; }

    std::span<const double> values() const { return {data_->data(), data_->size()}; }
    std::vector<double> to_vector() const { return *data_; }
    double operator[](std::size_t i) const { return (*data_)[i]; }
    double at(std::size_t r, std::size_t c) const { return (*data_)[r * cols() + c]; }
    double item() const {
        if (numel() != 1) throw ShapeError("item: tensor of shape " + to_string(shape_) + " is not scalar");
        return (*data_)[0];
    }

    bool attached() const { return tape_ != nullptr; }
    Tape* tape() const { return tape_; }
    std::size_t node() const { return node_; }

    /// Same values, cut from the tape (gradient does not flow through).
    Tensor detached() const {
        Tensor t = *this;
        t.tape_ = nullptr;
        t.node_ = kDetached;
        return t;
    }

    Tensor reshaped(Shape shape) const;

    std::shared_ptr<const std::vector<double>> buffer() const { return data_; }

private:
    friend class Tape;
    Shape shape_;
    std::shared_ptr<const std::vector<double>> data_;
    Tape* tape_ = nullptr;
    std::size_t node_ = kDetached;
};

/// Receives the gradient of the output and accumulates into input gradients.
/// `input_grads[k]` is null when input k is not attached.
using BackwardFn = std::function<void(std::span<const double> grad_out, std::span<double* const> input_grads)>;

class Gradients {
public:
    Gradients(const Tape* tape, std::vector<std::vector<double>> grads, std::vector<Shape> shapes)
        : tape_(tape), grads_(std::move(grads)), shapes_(std::move(shapes)) {}

    /// Gradient of the root w.r.t. `t`; zeros when `t` is unreachable from the root.
    Tensor of(const Tensor& t) const {
        if (t.tape() != tape_ || t.node() >= grads_.size())
            throw ShapeError("gradients: tensor is not attached to this tape");
        const auto& g = grads_[t.node()];
        if (g.empty()) return Tensor::zeros(t.shape());
        return Tensor(t.shape(), g);
    }

private:
    const Tape* tape_;
    std::vector<std::vector<double>> grads_;
    std::vector<Shape> shapes_;
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Attach `value` as a differentiable leaf.
    Tensor variable(const Tensor& value) {
        Tensor t = value.detached();
        t.tape_ = this;
        t.node_ = nodes_.size();
        nodes_.push_back(Node{t.shape(), {}, {}});
        return t;
    }

    std::size_t size() const { return nodes_.size(); }

    /// Record the result of an op. Inputs that are detached are stored as
    /// absent; all attached inputs must live on this tape.
    Tensor record(Shape shape, std::vector<double> values, std::initializer_list<const Tensor*> inputs,
                  BackwardFn backward) {
        Tensor out(std::move(shape), std::move(values));
        out.tape_ = this;
        out.node_ = nodes_.size();
        Node node{out.shape(), {}, std::move(backward)};
        for (const Tensor* in : inputs) node.inputs.push_back(in->attached() ? in->node() : Tensor::kDetached);
        nodes_.push_back(std::move(node));
        return out;
    }

    Gradients backward(const Tensor& root) const {
        if (root.tape() != this) throw ShapeError("backward: root is not attached to this tape");
        if (root.numel() != 1) throw ShapeError("backward: root of shape " + to_string(root.shape()) + " is not scalar");
        std::vector<std::vector<double>> grads(nodes_.size());
        std::vector<Shape> shapes;
        shapes.reserve(nodes_.size());
        for (const auto& n : nodes_) shapes.push_back(n.shape);
        grads[root.node()] = {1.0};
        std::vector<double*> input_ptrs;
        for (std::size_t i = root.node() + 1; i-- > 0;) {
            if (grads[i].empty()) continue;
            const Node& n = nodes_[i];
            if (!n.backward) continue;
            input_ptrs.assign(n.inputs.size(), nullptr);
            for (std::size_t k = 0; k < n.inputs.size(); ++k) {
                const auto id = n.inputs[k];
                if (id == Tensor::kDetached) continue;
                if (grads[id].empty()) grads[id].assign(shape_numel(nodes_[id].shape), 0.0);
                input_ptrs[k] = grads[id].data();
            }
            n.backward(grads[i], input_ptrs);
        }
        return Gradients(this, std::move(grads), std::move(shapes));
    }

private:
    struct Node {
        Shape shape;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
    };
    std::vector<Node> nodes_;
};

inline Tensor Tensor::reshaped(Shape shape) const {
    if (shape_numel(shape) != numel())
        throw ShapeError("reshape: " + to_string(shape_) + " -> " + to_string(shape));
    if (!attached()) return Tensor(std::move(shape), *data_);
    const std::size_t n = numel();
    return tape_->record(std::move(shape), *data_, {this}, [n](std::span<const double> g, std::span<double* const> in) {
        for (std::size_t i = 0; i < n; ++i) in[0][i] += g[i];
    });
}

namespace detail {

inline Tape* common_tape(const char* op, std::initializer_list<const Tensor*> inputs) {
    Tape* tape = nullptr;
    for (const Tensor* t : inputs) {
        if (!t->attached()) continue;
        if (tape && tape != t->tape()) throw ShapeError(std::string(op) + ": operands live on different tapes");
        tape = t->tape();
    }
    return tape;
}

inline Tensor make_result(const char* op, Shape shape, std::vector<double> values,
                          std::initializer_list<const Tensor*> inputs, BackwardFn backward) {
    if (Tape* tape = common_tape(op, inputs)) return tape->record(std::move(shape), std::move(values), inputs, std::move(backward));
    return Tensor(std::move(shape), std::move(values));
}

[[noreturn]] inline void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a) + " and " + to_string(b));
}

// How `b` lines up against `a` for an elementwise op.
enum class Broadcast { same, b_rows, a_rows };

inline bool is_row_of(const Shape& big, const Shape& small) {
    if (big.size() < 2) return false;
    Shape tail(big.begin() + 1, big.end());
    if (small == tail) return true;
    if (small.size() == big.size() && small[0] == 1) return Shape(small.begin() + 1, small.end()) == tail;
    return false;
}

inline Broadcast broadcast_kind(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() == b.shape()) return Broadcast::same;
    if (is_row_of(a.shape(), b.shape())) return Broadcast::b_rows;
    if (is_row_of(b.shape(), a.shape())) return Broadcast::a_rows;
    shape_mismatch(op, a.shape(), b.shape());
}

// Elementwise binary op with leading-dimension broadcasting. `f` computes the
// value; `da`, `db` the local partial derivatives given (a, b, out).
template <class F, class DA, class DB>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, F f, DA da, DB db) {
    const Broadcast kind = broadcast_kind(op, a, b);
    const Shape shape = kind == Broadcast::a_rows ? b.shape() : a.shape();
    const std::size_t n = shape_numel(shape);
    const std::size_t period = kind == Broadcast::b_rows ? b.numel() : kind == Broadcast::a_rows ? a.numel() : n;
    auto av = a.buffer();
    auto bv = b.buffer();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = (*av)[kind == Broadcast::a_rows ? i % period : i];
        const double y = (*bv)[kind == Broadcast::b_rows ? i % period : i];
        out[i] = f(x, y);
    }
    if (!a.attached() && !b.attached()) return Tensor(shape, std::move(out));
    auto outv = std::make_shared<const std::vector<double>>(out);
    return make_result(op, shape, std::move(out), {&a, &b},
                       [=](std::span<const double> g, std::span<double* const> in) {
                           for (std::size_t i = 0; i < n; ++i) {
                               const std::size_t ia = kind == Broadcast::a_rows ? i % period : i;
                               const std::size_t ib = kind == Broadcast::b_rows ? i % period : i;
                               const double x = (*av)[ia], y = (*bv)[ib], o = (*outv)[i];
                               if (in[0]) in[0][ia] += g[i] * da(x, y, o);
                               if (in[1]) in[1][ib] += g[i] * db(x, y, o);
                           }
                       });
}

// Elementwise unary op; `d` gives the local derivative from (x, out).
template <class F, class D>
Tensor unary(const char* op, const Tensor& a, F f, D d) {
    const std::size_t n = a.numel();
    auto av = a.buffer();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = f((*av)[i]);
    if (!a.attached()) return Tensor(a.shape(), std::move(out));
    auto outv = std::make_shared<const std::vector<double>>(out);
    return make_result(op, a.shape(), std::move(out), {&a},
                       [=](std::span<const double> g, std::span<double* const> in) {
                           for (std::size_t i = 0; i < n; ++i) in[0][i] += g[i] * d((*av)[i], (*outv)[i]);
                       });
}

inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
inline double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

inline void require_matrix(const char* op, const Tensor& t) {
    if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got shape " + to_string(t.shape()));
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
    return detail::binary(
        "add", a, b, [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
        [](double, double, double) { return 1.0; });
}
inline Tensor sub(const Tensor& a, const Tensor& b) {
    return detail::binary(
        "sub", a, b, [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
        [](double, double, double) { return -1.0; });
}
inline Tensor mul(const Tensor& a, const Tensor& b) {
    return detail::binary(
        "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
        [](double x, double, double) { return x; });
}
inline Tensor div(const Tensor& a, const Tensor& b) {
    return detail::binary(
        "div", a, b, [](double x, double y) { return x / y; }, [](double, double y, double) { return 1.0 / y; },
        [](double, double y, double o) { return -o / y; });
}

inline Tensor scale(const Tensor& a, double c) {
    return detail::unary(
        "scale", a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}
inline Tensor add_scalar(const Tensor& a, double c) {
    return detail::unary(
        "add_scalar", a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}
inline Tensor neg(const Tensor& a) { return scale(a, -1.0); }

inline Tensor exp(const Tensor& a) {
    return detail::unary(
        "exp", a, [](double x) { return std::exp(x); }, [](double, double o) { return o; });
}
inline Tensor log(const Tensor& a) {
    return detail::unary(
        "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}
inline Tensor tanh(const Tensor& a) {
    return detail::unary(
        "tanh", a, [](double x) { return std::tanh(x); }, [](double, double o) { return 1.0 - o * o; });
}
inline Tensor softplus(const Tensor& a) {
    return detail::unary(
        "softplus", a, [](double x) { return detail::softplus(x); },
        [](double x, double) { return detail::sigmoid(x); });
}
inline Tensor sigmoid(const Tensor& a) {
    return detail::unary(
        "sigmoid", a, [](double x) { return detail::sigmoid(x); }, [](double, double o) { return o * (1.0 - o); });
}
inline Tensor square(const Tensor& a) {
    return detail::unary(
        "square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}
/// Clamp into [lo, hi]; zero gradient outside the interval.
inline Tensor clamp(const Tensor& a, double lo, double hi) {
    return detail::unary(
        "clamp", a, [=](double x) { return std::clamp(x, lo, hi); },
        [=](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator*(double c, const Tensor& a) { return scale(a, c); }
inline Tensor operator*(const Tensor& a, double c) { return scale(a, c); }
inline Tensor operator+(const Tensor& a, double c) { return add_scalar(a, c); }
inline Tensor operator-(const Tensor& a, double c) { return add_scalar(a, -c); }

inline Tensor sum(const Tensor& a) {
    const std::size_t n = a.numel();
    double s = 0.0;
    for (double v : a.values()) s += v;
    return detail::make_result("sum", Shape{1}, {s}, {&a}, [n](std::span<const double> g, std::span<double* const> in) {
        for (std::size_t i = 0; i < n; ++i) in[0][i] += g[0];
    });
}

inline Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

/// Sum over the trailing dimension(s): [B, ...] -> [B].
inline Tensor row_sum(const Tensor& a) {
    const std::size_t rows = a.rows(), cols = a.cols();
    std::vector<double> out(rows, 0.0);
    auto v = a.values();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[r] += v[r * cols + c];
    return detail::make_result("row_sum", Shape{rows}, std::move(out), {&a},
                               [rows, cols](std::span<const double> g, std::span<double* const> in) {
                                   for (std::size_t r = 0; r < rows; ++r)
                                       for (std::size_t c = 0; c < cols; ++c) in[0][r * cols + c] += g[r];
                               });
}

/// Numerically stable log-sum-exp of every row: [B, D] -> [B].
inline Tensor logsumexp_rows(const Tensor& a) {
    detail::require_matrix("logsumexp_rows", a);
    const std::size_t rows = a.rows(), cols = a.cols();
    auto av = a.buffer();
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < cols; ++c) m = std::max(m, (*av)[r * cols + c]);
        double s = 0.0;
        for (std::size_t c = 0; c < cols; ++c) s += std::exp((*av)[r * cols + c] - m);
        out[r] = m + std::log(s);
    }
    auto outv = std::make_shared<const std::vector<double>>(out);
    return detail::make_result("logsumexp_rows", Shape{rows}, std::move(out), {&a},
                               [=](std::span<const double> g, std::span<double* const> in) {
                                   for (std::size_t r = 0; r < rows; ++r)
                                       for (std::size_t c = 0; c < cols; ++c)
                                           in[0][r * cols + c] += g[r] * std::exp((*av)[r * cols + c] - (*outv)[r]);
                               });
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    detail::require_matrix("matmul", a);
    detail::require_matrix("matmul", b);
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    if (b.shape()[0] != k) detail::shape_mismatch("matmul", a.shape(), b.shape());
    auto av = a.buffer();
    auto bv = b.buffer();
    std::vector<double> out(m * n);
    const auto em = static_cast<Eigen::Index>(m), ek = static_cast<Eigen::Index>(k), en = static_cast<Eigen::Index>(n);
    detail::MutMap(out.data(), em, en).noalias() = detail::ConstMap(av->data(), em, ek) * detail::ConstMap(bv->data(), ek, en);
    return detail::make_result("matmul", Shape{m, n}, std::move(out), {&a, &b},
                               [=](std::span<const double> g, std::span<double* const> in) {
                                   detail::ConstMap G(g.data(), em, en);
                                   if (in[0]) detail::MutMap(in[0], em, ek).noalias() += G * detail::ConstMap(bv->data(), ek, en).transpose();
                                   if (in[1]) detail::MutMap(in[1], ek, en).noalias() += detail::ConstMap(av->data(), em, ek).transpose() * G;
                               });
}

inline Tensor transpose(const Tensor& a) {
    detail::require_matrix("transpose", a);
    const std::size_t r = a.shape()[0], c = a.shape()[1];
    std::vector<double> out(r * c);
    auto v = a.values();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = v[i * c + j];
    return detail::make_result("transpose", Shape{c, r}, std::move(out), {&a},
                               [r, c](std::span<const double> g, std::span<double* const> in) {
                                   for (std::size_t i = 0; i < r; ++i)
                                       for (std::size_t j = 0; j < c; ++j) in[0][i * c + j] += g[j * r + i];
                               });
}

/// Columns [begin, end) of a matrix.
inline Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
    detail::require_matrix("slice_cols", a);
    const std::size_t rows = a.shape()[0], cols = a.shape()[1];
    if (begin >= end || end > cols)
        throw ShapeError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) + ") out of " + to_string(a.shape()));
    const std::size_t w = end - begin;
    std::vector<double> out(rows * w);
    auto v = a.values();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < w; ++c) out[r * w + c] = v[r * cols + begin + c];
    return detail::make_result("slice_cols", Shape{rows, w}, std::move(out), {&a},
                               [=](std::span<const double> g, std::span<double* const> in) {
                                   for (std::size_t r = 0; r < rows; ++r)
                                       for (std::size_t c = 0; c < w; ++c) in[0][r * cols + begin + c] += g[r * w + c];
                               });
}

/// Rows [begin, end) of a matrix.
inline Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
    detail::require_matrix("slice_rows", a);
    const std::size_t rows = a.shape()[0], cols = a.shape()[1];
    if (begin >= end || end > rows)
        throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) + ") out of " + to_string(a.shape()));
    auto v = a.values();
    std::vector<double> out(v.begin() + static_cast<std::ptrdiff_t>(begin * cols), v.begin() + static_cast<std::ptrdiff_t>(end * cols));
    return detail::make_result("slice_rows", Shape{end - begin, cols}, std::move(out), {&a},
                               [=](std::span<const double> g, std::span<double* const> in) {
                                   for (std::size_t i = 0; i < g.size(); ++i) in[0][begin * cols + i] += g[i];
                               });
}

inline Tensor concat_cols(const Tensor& a, const Tensor& b) {
    detail::require_matrix("concat_cols", a);
    detail::require_matrix("concat_cols", b);
    const std::size_t rows = a.shape()[0], ca = a.shape()[1], cb = b.shape()[1];
    if (b.shape()[0] != rows) detail::shape_mismatch("concat_cols", a.shape(), b.shape());
    const std::size_t w = ca + cb;
    std::vector<double> out(rows * w);
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(av.begin() + static_cast<std::ptrdiff_t>(r * ca), ca, out.begin() + static_cast<std::ptrdiff_t>(r * w));
        std::copy_n(bv.begin() + static_cast<std::ptrdiff_t>(r * cb), cb, out.begin() + static_cast<std::ptrdiff_t>(r * w + ca));
    }
    return detail::make_result("concat_cols", Shape{rows, w}, std::move(out), {&a, &b},
                               [=](std::span<const double> g, std::span<double* const> in) {
                                   for (std::size_t r = 0; r < rows; ++r) {
                                       if (in[0])
                                           for (std::size_t c = 0; c < ca; ++c) in[0][r * ca + c] += g[r * w + c];
                                       if (in[1])
                                           for (std::size_t c = 0; c < cb; ++c) in[1][r * cb + c] += g[r * w + ca + c];
                                   }
                               });
}

/// Squared Euclidean distances between the rows of `a` [n, d] and `b` [m, d] -> [n, m].
inline Tensor pairwise_sq_dist(const Tensor& a, const Tensor& b) {
    detail::require_matrix("pairwise_sq_dist", a);
    detail::require_matrix("pairwise_sq_dist", b);
    const std::size_t n = a.shape()[0], m = b.shape()[0], d = a.shape()[1];
    if (b.shape()[1] != d) detail::shape_mismatch("pairwise_sq_dist", a.shape(), b.shape());
    auto av = a.buffer();
    auto bv = b.buffer();
    std::vector<double> out(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = (*av)[i * d + k] - (*bv)[j * d + k];
                s += diff * diff;
            }
            out[i * m + j] = s;
        }
    return detail::make_result("pairwise_sq_dist", Shape{n, m}, std::move(out), {&a, &b},
                               [=](std::span<const double> g, std::span<double* const> in) {
                                   for (std::size_t i = 0; i < n; ++i)
                                       for (std::size_t j = 0; j < m; ++j) {
                                           const double gij = g[i * m + j];
                                           if (gij == 0.0) continue;
                                           for (std::size_t k = 0; k < d; ++k) {
                                               const double diff = 2.0 * gij * ((*av)[i * d + k] - (*bv)[j * d + k]);
                                               if (in[0]) in[0][i * d + k] += diff;
                                               if (in[1]) in[1][j * d + k] -= diff;
                                           }
                                       }
                               });
}

/// Max over coordinates of |analytic - central difference| / (|central difference| + 1e-8).
/// `f` receives an attached tensor when called for the analytic gradient and a
/// detached one for the finite differences; it must return a scalar.
template <class F>
double grad_check(F&& f, const Tensor& x, double step = 1e-5) {
    auto finite_or_throw = [](double v) {
        if (!std::isfinite(v)) throw NumericError("grad_check: function value is not finite");
        return v;
    };
    Tape tape;
    const Tensor xv = tape.variable(x);
    const Tensor y = f(xv);
    finite_or_throw(y.item());
    // an output that never touched the tape is constant in x
    const Tensor g = y.tape() == &tape ? tape.backward(y).of(xv) : Tensor::zeros(x.shape());

    double worst = 0.0;
    std::vector<double> probe = x.to_vector();
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + step;
        const double up = finite_or_throw(f(Tensor(x.shape(), probe)).item());
        probe[i] = orig - step;
        const double down = finite_or_throw(f(Tensor(x.shape(), probe)).item());
        probe[i] = orig;
        const double fd = (up - down) / (2.0 * step);
        worst = std::max(worst, std::abs(g[i] - fd) / (std::abs(fd) + 1e-8));
    }
    return worst;
}

}  // namespace infovae
