#pragma once

#include <stdexcept>
#include <string>

namespace pfr {

/// Base of all library errors. `exit_code()` is the process status the CLI
/// reports for the error category.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

/// Malformed or inconsistent experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// Out-of-range hyper-parameter or argument (p >= n, K < 1, gamma outside [0,1]).
class ParameterError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

class DimensionError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

/// Unreadable or invalid input data (CSV parse failures, missing columns,
/// single-class labels, unknown record ids).
class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

class NumericalError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

/// Non-finite matrix entries.
class InputError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// gamma == 1 with an empty fairness graph, and similar objectives that carry
/// no information.
class DegenerateObjectiveError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class KernelError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class TrainingError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A metric whose denominator is empty (single-class AUC, zero-weight graph).
class MetricError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace pfr
