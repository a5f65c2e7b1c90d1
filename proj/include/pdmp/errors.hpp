#pragma once

#include <stdexcept>
#include <string>

namespace pdmp {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A supplied model violates a structural requirement (negative rate,
/// atom mass outside (0,1], killing-time inconsistency, ...).
class ModelError : public Error {
 public:
  using Error::Error;
};

/// A quadrature or Stieltjes integral failed to converge or produced a
/// non-finite value; the message names the offending subinterval.
class IntegrabilityError : public Error {
 public:
  using Error::Error;
};

/// Evaluation requested outside the definition interval of a path.
class PathDomainError : public Error {
 public:
  using Error::Error;
};

/// A test function is not in the domain of the requested generator.
class NotInDomainError : public Error {
 public:
  using Error::Error;
};

/// A path exceeded the jump-count cap; message carries the tail of the
/// jump-time sequence for diagnosis.
class ExplosionError : public Error {
 public:
  using Error::Error;
};

/// Fixed-point iteration failed (non-contraction or max_iter exceeded).
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Bad CLI / run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace pdmp
