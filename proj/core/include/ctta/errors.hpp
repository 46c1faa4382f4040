#pragma once

#include <stdexcept>

namespace ctta {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad numeric content (non-probability vectors, negative entries, ...).
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values encountered where the math requires finite ones.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PretrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ctta
