#pragma once

#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "infovae/errors.hpp"

namespace infovae {

/// A real number or an explicit infinity marker. Divergences that are infinite
/// because of a support mismatch are represented as markers, not overflowed
/// doubles.
class ExtReal {
public:
    enum class Kind { finite, pos_inf, neg_inf, undefined };

    constexpr ExtReal() = default;
    constexpr ExtReal(double v) : kind_(Kind::finite), value_(v) {}  // NOLINT(google-explicit-constructor)

    static constexpr ExtReal pos_inf() { return ExtReal(Kind::pos_inf); }
    static constexpr ExtReal neg_inf() { return ExtReal(Kind::neg_inf); }
    static constexpr ExtReal undefined() { return ExtReal(Kind::undefined); }

    constexpr Kind kind() const { return kind_; }
    constexpr bool is_finite() const { return kind_ == Kind::finite; }
    constexpr bool is_pos_inf() const { return kind_ == Kind::pos_inf; }
    constexpr bool is_neg_inf() const { return kind_ == Kind::neg_inf; }

    double value() const {
        if (!is_finite()) throw NumericError("ExtReal: value requested from a non-finite marker (" + str() + ")");
        return value_;
    }

    double to_double() const {
        switch (kind_) {
            case Kind::finite: return value_;
            case Kind::pos_inf: return std::numeric_limits<double>::infinity();
            case Kind::neg_inf: return -std::numeric_limits<double>::infinity();
            case Kind::undefined: return std::numeric_limits<double>::quiet_NaN();
        }
        return std::numeric_limits<double>::quiet_NaN();
    }

    std::string str() const {
        switch (kind_) {
            case Kind::finite: return std::to_string(value_);
            case Kind::pos_inf: return "+inf";
            case Kind::neg_inf: return "-inf";
            case Kind::undefined: return "undefined";
        }
        return "?";
    }

    friend ExtReal operator-(ExtReal a) {
        switch (a.kind_) {
            case Kind::finite: return ExtReal(-a.value_);
            case Kind::pos_inf: return neg_inf();
            case Kind::neg_inf: return pos_inf();
            case Kind::undefined: return a;
        }
        return a;
    }

    friend ExtReal operator+(ExtReal a, ExtReal b) {
        if (a.kind_ == Kind::undefined || b.kind_ == Kind::undefined) return undefined();
        if (a.is_finite() && b.is_finite()) return ExtReal(a.value_ + b.value_);
        if (a.is_finite()) return b;
        if (b.is_finite()) return a;
        return a.kind_ == b.kind_ ? a : undefined();
    }
    friend ExtReal operator-(ExtReal a, ExtReal b) { return a + (-b); }

    /// Scaling by 0 removes the term, even when it is infinite.
    friend ExtReal operator*(double c, ExtReal a) {
        if (c == 0.0 && a.kind_ != Kind::undefined) return ExtReal(0.0);
        if (a.is_finite()) return ExtReal(c * a.value_);
        if (a.kind_ == Kind::undefined) return a;
        return c > 0.0 ? a : -a;
    }

    friend std::ostream& operator<<(std::ostream& os, const ExtReal& e) { return os << e.str(); }

private:
    constexpr explicit ExtReal(Kind k) : kind_(k) {}
    Kind kind_ = Kind::finite;
    double value_ = 0.0;
};

/// Neumaier compensated summation.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            c_ += (sum_ - t) + x;
        else
            c_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + c_; }

private:
    double sum_ = 0.0;
    double c_ = 0.0;
};

}  // namespace infovae
