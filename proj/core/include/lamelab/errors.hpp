#pragma once

#include <stdexcept>
#include <string>

namespace lamelab {

/// Invalid construction arguments or violated call preconditions.
struct PreconditionError : std::invalid_argument {
    explicit PreconditionError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// A sampled value came back non-finite or otherwise unusable.
struct EvaluationError : std::runtime_error {
    explicit EvaluationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Weight or integrand magnitude left the representable range.
struct OverflowError : std::runtime_error {
    explicit OverflowError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Iterative solver failed to reach the requested tolerance.
struct SolverError : std::runtime_error {
    SolverError(const std::string& msg, double residual, int iterations)
        : std::runtime_error(msg), final_residual(residual), iterations(iterations) {}
    double final_residual;
    int iterations;
};

} // namespace lamelab
