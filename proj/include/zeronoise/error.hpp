#pragma once

#include <stdexcept>
#include <string>

namespace zeronoise {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter lies outside the domain of the family or operation.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Malformed input data: non-finite values, dimension mismatch, empty measures.
class InputError : public Error {
public:
    using Error::Error;
};

/// A draw or state violated the contract of the random system.
class ContractError : public Error {
public:
    using Error::Error;
};

/// Numerical failure: bracketing lost, quadrature defect, non-convergence.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Iterative solver ran out of iterations.
class NonConvergenceError : public NumericError {
public:
    NonConvergenceError(const std::string& what, double last_residual)
        : NumericError(what + " (last residual " + std::to_string(last_residual) + ")"),
          last_residual_(last_residual) {}

    double last_residual() const noexcept { return last_residual_; }

private:
    double last_residual_;
};

/// No admissible configuration was found by a constructive search.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

/// A hypothesis of a diagnostic was violated; `step()` names the offending iterate.
class HypothesisError : public Error {
public:
    HypothesisError(const std::string& what, int step) : Error(what), step_(step) {}

    int step() const noexcept { return step_; }

private:
    int step_;
};

/// Invalid experiment configuration (CLI or config file).
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace zeronoise
