#pragma once

#include <stdexcept>
#include <string>

namespace abic {

/// Invalid distribution or model parameters (non-PD dispersion, beta <= 0, bad shapes).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A linear-algebra step failed (singular block, non-finite objective).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape-parameter estimation could not produce a value.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed user input: CSV, JSON graph, prior-knowledge file.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace abic
