#pragma once

#include <stdexcept>
#include <string>

namespace retirement {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Invalid or inconsistent model/configuration input.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Numerical failure inside a solver (CFL breach, step underflow, NaN).
class SolverError : public Error {
public:
    using Error::Error;
};

/// Calibration search found no admissible leisure parameter.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

}  // namespace retirement
