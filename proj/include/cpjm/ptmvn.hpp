#pragma once

#include <Eigen/Dense>

#include "cpjm/rng.hpp"
#include "cpjm/truncnorm.hpp"

namespace cpjm {

/// Partially truncated multivariate normal: a q-dimensional normal whose
/// FIRST coordinate (the change point omega) is restricted to (lower, upper)
/// and renormalized. Storage order is always (omega, b...); inputs written in
/// the opposite order must be permuted before construction.
struct PtmvnParams {
  Eigen::VectorXd mu;     // (mu_omega, mu_b')'
  Eigen::MatrixXd Sigma;  // symmetric positive definite
  double lower = -kInf;
  double upper = kInf;

  int dim() const { return static_cast<int>(mu.size()); }
  double sigma_omega() const { return std::sqrt(Sigma(0, 0)); }
  double lambda() const { return (lower - mu(0)) / sigma_omega(); }
  double upsilon() const { return (upper - mu(0)) / sigma_omega(); }

  /// Marginal law of the truncated coordinate.
  TruncNormParams omega_marginal() const {
    return {mu(0), sigma_omega(), lower, upper};
  }

  /// Throws std::invalid_argument (shape, bounds, non-PD Sigma) or
  /// DegenerateTruncation (empty truncation mass).
  void validate() const;
};

struct ConditionalNormal {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // symmetric PSD; eigenvalues clamped at -1e-10
};

/// Joint log density at r = (omega, b); -inf when omega is outside the open
/// truncation interval.
double ptmvn_logpdf(const Eigen::VectorXd& r, const PtmvnParams& p);

/// b | omega, a plain multivariate normal. Requires lower < omega < upper.
ConditionalNormal cond_b_given_omega(double omega, const PtmvnParams& p);

/// omega | b, a truncated normal on (lower, upper).
TruncNormParams cond_omega_given_b(const Eigen::VectorXd& b,
                                   const PtmvnParams& p);

/// Exact draw: omega from its truncated-normal marginal, then b | omega.
Eigen::VectorXd ptmvn_sample(Rng& rng, const PtmvnParams& p);

/// Moment generating function E[exp(t'r)], evaluated in log space.
/// Throws std::overflow_error (message carries the log-MGF) on overflow.
double ptmvn_mgf(const Eigen::VectorXd& t, const PtmvnParams& p);
double ptmvn_log_mgf(const Eigen::VectorXd& t, const PtmvnParams& p);

/// Closed-form mean: mu - (phi(upsilon)-phi(lambda))/(Phi(upsilon)-Phi(lambda)) * q
/// with q = Sigma[:,0]/sigma_omega.
Eigen::VectorXd ptmvn_mean(const PtmvnParams& p);

/// E[omega^m Delta^k 1{alpha <= Delta <= beta}] with Delta = s - omega and
/// omega ~ TN(tn). Expanded over truncated-normal moments on the intersection
/// of (s - beta, s - alpha) with the TN support; returns 0 when empty. The
/// atom at Delta = 0 has probability zero, so the closure of the indicator
/// interval is immaterial.
double partial_moment(int m, int k, double s, double alpha, double beta,
                      const TruncNormParams& tn);

}  // namespace cpjm
