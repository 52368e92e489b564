#pragma once

#include <stdexcept>
#include <string>

namespace rgbpose {

/// Tensor/matrix dimension mismatch. Message names both offending shapes.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Bad configuration value, incompatible checkpoint/dataset, unknown config key.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Wrong API usage (non-scalar loss, missing tape, bad sample id).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Scene generation failure (object behind camera, unwritable output).
struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Degenerate geometric configuration (collinear points, rank-deficient covariance).
struct DegenerateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace rgbpose
