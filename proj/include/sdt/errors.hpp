#pragma once

#include <stdexcept>
#include <string>

namespace sdt {

// Shape or size disagreement between operands.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Invalid hyperparameter or model/run configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// API misuse, e.g. backward() on a non-scalar.
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// A fixed-capacity table was asked for more rows than it holds.
class CapacityError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

// NaN/Inf produced by an operation.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed dataset, config or checkpoint file.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace sdt
