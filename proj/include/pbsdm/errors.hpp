#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pbsdm {

// Bad settings, unknown names, invalid method/link combinations.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of an operation (e.g. pi not in (0,1)).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Non-finite or non-positive quantity met while evaluating a likelihood.
struct EvaluationError : std::runtime_error {
  EvaluationError(const std::string& what, std::ptrdiff_t index = -1)
      : std::runtime_error(index >= 0 ? what + " (row " + std::to_string(index) + ")" : what),
        index_(index) {}
  std::ptrdiff_t index() const noexcept { return index_; }

 private:
  std::ptrdiff_t index_;
};

struct OptimizationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or non-finite input data (CSV parsing, dataset invariants).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pbsdm
