#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace phaselsq {

/// Input shapes disagree (frame vs signal vs measurement lengths).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An exhaustive enumeration would exceed the configured cap.
class EnumerationCapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure: factorization breakdown, degenerate initialization,
/// rejected Monte Carlo population, and similar.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// R(x) is numerically singular, so the estimation bounds are meaningless.
/// Carries the offending null direction.
class UnidentifiableError : public NumericalError {
 public:
  UnidentifiableError(const std::string& what, std::vector<double> null_direction)
      : NumericalError(what), null_direction(std::move(null_direction)) {}

  std::vector<double> null_direction;
};

}  // namespace phaselsq
