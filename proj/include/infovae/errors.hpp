#pragma once

#include <stdexcept>
#include <string>

namespace infovae {

/// Operand shapes or dimensions do not conform.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A value that must be finite was not (NaN, overflow, blown-up loss).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration, precondition or argument value.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed input file (dataset, checkpoint, config).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace infovae
