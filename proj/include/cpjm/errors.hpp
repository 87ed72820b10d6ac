#pragma once

#include <stdexcept>
#include <string>

namespace cpjm {

/// Configuration problems (bad config file, invalid scenario field).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed input data (CSV parse failures, per-subject invariant breaks).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Sampler failures (no finite starting point, too many failed fits).
struct SamplerError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// NaN log posterior; message carries the per-component breakdown.
struct NonFiniteLogpost : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cpjm
