#pragma once

#include <stdexcept>
#include <string>

namespace sasow {

// Malformed arguments, files, or configuration.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// NaN/Inf where finite values are required, or a diverging optimizer.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// No feasible composition to predict.
class PredictionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem write failures.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sasow
