#pragma once

#include <stdexcept>
#include <string>

namespace gmcsim {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A value violates a type invariant or an operation precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A configuration is internally valid but unusable (e.g. a resistor that
/// goes non-positive inside the declared temperature range).
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// Internal numerical inconsistency; reaching it indicates a bug.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver ran out of iterations or lost its bracket.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace gmcsim
