#pragma once

#include <stdexcept>
#include <string>

namespace ccplan {

enum class ErrorKind {
  kDimensionMismatch,
  kNotPositiveDefinite,
  kDegenerateShape,
  kZeroDirection,
  kSingularCovariance,
  kOutOfRange,
  kNonConvergence,
  kInfeasible,
  kInvalidInput,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; `kind()` lets callers (and the CLI
// exit-code mapping) distinguish input problems from numerical failures.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace ccplan
