#ifndef SBD_ERROR_HPP
#define SBD_ERROR_HPP

#include <stdexcept>
#include <string>

namespace sbd {

/// Process exit codes used by the command line driver.
enum class ExitCode : int {
  kSuccess = 0,
  kConfig = 2,
  kNumerical = 3,
  kStatistical = 4,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept { return ExitCode::kConfig; }
};

/// A point outside the torus, or a geometric precondition violated.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Bad numeric parameter (non-positive horizon, tolerance, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A model that cannot be simulated (unbounded path loss, supercritical load, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A type invariant was violated on construction.
class InvariantError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kNumerical; }
};

/// Not enough samples for a statistical procedure.
class StateError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kStatistical; }
};

}  // namespace sbd

#endif  // SBD_ERROR_HPP
