#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace idec {

// Numerical failures: divergence, singular systems, tolerance breaches.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SingularMatrixError : NumericalError {
    using NumericalError::NumericalError;
};

// Solver iteration failure; carries the per-iteration sup-differences.
struct IterationError : NumericalError {
    std::vector<double> trace;
    bool diverged;
    IterationError(const std::string& message, std::vector<double> t, bool d)
        : NumericalError(message), trace(std::move(t)), diverged(d) {}
};

// Config file problems: JSON syntax, schema violations, bad formulas.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Config-level semantic validation; lists every violated field.
struct ValidationError : std::runtime_error {
    std::vector<std::string> fields;
    ValidationError(const std::string& message, std::vector<std::string> f)
        : std::runtime_error(message), fields(std::move(f)) {}
};

} // namespace idec
