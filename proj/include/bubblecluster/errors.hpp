#pragma once

#include <stdexcept>
#include <string>

namespace bubblecluster {

/// Input outside the mathematical domain of an operation (coincident
/// points, non-positive rates, invalid dimension, ...).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A stated precondition of an operation does not hold (window membership,
/// positivity of the potential, grid resolution cap, ...).
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An iterative numerical procedure failed to reach its tolerance.
/// Carries the best value and the achieved error so callers can report it.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double best_value, double achieved)
        : std::runtime_error(what), best_value_(best_value), achieved_(achieved) {}

    double best_value() const noexcept { return best_value_; }
    double achieved() const noexcept { return achieved_; }

private:
    double best_value_;
    double achieved_;
};

/// The grid cannot resolve the requested bubble (lambda * h above the cap).
class ResolutionRefusal : public PreconditionError {
public:
    using PreconditionError::PreconditionError;
};

} // namespace bubblecluster
