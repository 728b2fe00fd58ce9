#pragma once

#include <stdexcept>
#include <string>

namespace gora {

// Every failure raised by the library derives from Error so callers can catch
// one type at the workflow boundary.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (negative age, tau outside (0,1), ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Goal function or configuration that violates a construction invariant.
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Iterative procedure did not settle within its iteration budget.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Series truncation error bound too large relative to the computed value.
class PrecisionError : public Error {
 public:
  using Error::Error;
};

/// Hessian requested at a kink of the goal function.
class NonSmoothError : public Error {
 public:
  using Error::Error;
};

/// Optimizer found neither a stationary point nor a boundary optimum.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Request too large for an exhaustive search.
class RangeError : public Error {
 public:
  using Error::Error;
};

}  // namespace gora
