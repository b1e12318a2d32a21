#pragma once

#include <stdexcept>
#include <string>

namespace avgq {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor/table shapes disagree with the declared dimensions.
class DimensionError : public Error {
public:
    using Error::Error;
};

class IndexError : public Error {
public:
    using Error::Error;
};

/// Invalid user-supplied configuration (schedules, radii, brackets).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Instance too large for an exhaustive routine, or too few replications.
class SizeError : public Error {
public:
    using Error::Error;
};

/// Singular or ill-conditioned linear system.
class SolverFailure : public Error {
public:
    using Error::Error;
};

class NonConvergence : public Error {
public:
    NonConvergence(const std::string& what, double last_residual, long iterations)
        : Error(what + " (residual " + std::to_string(last_residual) + " after " +
                std::to_string(iterations) + " iterations)"),
          residual(last_residual), iterations(iterations) {}

    double residual;
    long iterations;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, long line)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line(line) {}

    long line;
};

}  // namespace avgq
