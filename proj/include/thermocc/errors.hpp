#pragma once

#include <stdexcept>
#include <string>

namespace thermocc {

// Bad input: invariant violations, unparsable values, inconsistent dimensions.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure inside the estimator's QP solve.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InfeasibleError : public SolverError {
 public:
  using SolverError::SolverError;
};

// Forward integration produced a non-finite temperature.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace thermocc
