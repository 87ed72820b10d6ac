#pragma once

#include <limits>
#include <stdexcept>
#include <string>

#include "cpjm/rng.hpp"

namespace cpjm {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Thrown when a truncation region carries no usable probability mass
/// (normalizing constant below 1e-300).
struct DegenerateTruncation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Standard-normal primitives
// ---------------------------------------------------------------------------

double std_normal_pdf(double x);
double std_normal_logpdf(double x);

/// Phi(x). Accepts +-inf; NaN input throws.
double std_normal_cdf(double x);

/// 1 - Phi(x) without cancellation for large positive x.
double std_normal_ccdf(double x);

/// log Phi(x), stable arbitrarily far into the lower tail.
double std_normal_logcdf(double x);

/// log(1 - Phi(x)), stable arbitrarily far into the upper tail.
double std_normal_logccdf(double x);

/// P(lo < Z < hi) for standard normal Z, computed on whichever side of the
/// origin avoids cancellation; exact 0 is possible only by underflow.
double normal_mass(double lo, double hi);

/// log P(lo < Z < hi); finite even when the mass underflows double range,
/// as long as the interval is nonempty.
double log_normal_mass(double lo, double hi);

// ---------------------------------------------------------------------------
// Truncated normal
// ---------------------------------------------------------------------------

/// TN(mu, sigma^2, a, b); either bound may be infinite.
struct TruncNormParams {
  double mu = 0.0;
  double sigma = 1.0;
  double a = -kInf;
  double b = kInf;

  /// Throws std::invalid_argument on malformed parameters and
  /// DegenerateTruncation when the truncation mass is numerically empty.
  void validate() const;

  double lo_std() const { return (a - mu) / sigma; }
  double hi_std() const { return (b - mu) / sigma; }
};

/// log density at x; -inf outside the open interval (a, b).
double tn_logpdf(double x, const TruncNormParams& p);

/// CDF of the truncated distribution at x.
double tn_cdf(double x, const TruncNormParams& p);

/// Exact draw; rejection-based, remains efficient for far-tail regions.
double tn_sample(Rng& rng, const TruncNormParams& p);

/// k-th raw moment E[X^k] by the recursion
///   m_k = (k-1) sigma^2 m_{k-2} + mu m_{k-1}
///         - sigma * (b^{k-1} phi(b~) - a^{k-1} phi(a~)) / Z,
/// with m_0 = 1, m_{-1} = 0, standardized bounds a~ = (a-mu)/sigma,
/// b~ = (b-mu)/sigma, Z = Phi(b~) - Phi(a~), and the convention x^0 = 1.
/// Boundary terms at infinite bounds vanish and are dropped analytically.
double tn_moment(int k, const TruncNormParams& p);

/// First moment, same as tn_moment(1, p).
double tn_mean(const TruncNormParams& p);

}  // namespace cpjm
