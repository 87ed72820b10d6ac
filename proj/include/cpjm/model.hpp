#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cpjm/errors.hpp"
#include "cpjm/truncnorm.hpp"

namespace cpjm {

// ---------------------------------------------------------------------------
// Data and parameter containers
// ---------------------------------------------------------------------------

/// One subject: visit-level covariates and outcomes plus the survival record.
struct SubjectRecord {
  std::string id;
  Eigen::MatrixXd x;  // n_visits x px fixed-effect covariates (px may be 0)
  Eigen::VectorXd w;  // survival covariates (may be empty)
  Eigen::VectorXd s;  // visit times, strictly increasing, last <= t_obs
  Eigen::VectorXd y;  // outcomes, same length as s
  double t_obs = 0.0;
  bool event = false;

  int n_visits() const { return static_cast<int>(s.size()); }
  /// Throws DataError naming the subject and the violated invariant.
  /// Zero-visit subjects are rejected unless allow_no_visits is set (the
  /// model itself tolerates them; data loading does not).
  void validate(bool allow_no_visits = false) const;
};

/// Structural parameters: Weibull PH survival (gamma, eta, alpha),
/// random-effect location/scale/correlation with omega stored first, and the
/// outcome model (beta, sigma_y).
struct ModelParams {
  Eigen::VectorXd gamma;
  double eta = 1.0;
  double alpha = 1.0;
  Eigen::VectorXd beta;
  double sigma_y = 1.0;
  double mu_omega = 0.0;
  Eigen::Vector3d mu_b = Eigen::Vector3d::Zero();
  Eigen::Vector4d sd_r = Eigen::Vector4d::Ones();  // (omega, b0, b1, b2)
  Eigen::Matrix4d Gamma_r = Eigen::Matrix4d::Identity();

  Eigen::Vector4d mu_r() const {
    return {mu_omega, mu_b(0), mu_b(1), mu_b(2)};
  }
  Eigen::Matrix4d Sigma_r() const {
    return sd_r.asDiagonal() * Gamma_r * sd_r.asDiagonal();
  }
  void validate() const;
};

struct GndPrior {
  double mu = 0.0;
  double alpha = 1.0;
  double beta = 2.0;
};

/// Hyperparameters; defaults are the weakly informative choices used by the
/// simulation study.
struct PriorConfig {
  GndPrior mu_omega{0.5, 0.5, 8.0};
  GndPrior mu_b0{0.0, 1.0, 8.0};
  GndPrior mu_b1{-0.5, 0.5, 8.0};
  GndPrior mu_b2{0.5, 0.5, 8.0};
  double sigma_gamma = 10.0;   // normal scale for survival coefficients
  double sigma_beta = 10.0;    // normal scale for outcome coefficients
  double sigma_eta = 10.0;     // half-normal scale for the Weibull scale
  double sigma_alpha = 10.0;   // half-normal scale for the Weibull shape
  double sigma_sigma_y = 10.0; // half-normal scale for the residual SD
  double sd_r_scale = 1.0;     // half-normal scale for random-effect SDs
  double lkj_eta = 1.0;        // correlation concentration

  void validate() const;
};

// ---------------------------------------------------------------------------
// Density building blocks
// ---------------------------------------------------------------------------

/// Piecewise-linear mixed-model log likelihood of one subject's outcomes
/// given its random effects: mean x'beta + b0 + b1 (s - omega) 1{s <= omega}
/// + b2 (s - omega) 1{s > omega}.
double longitudinal_loglik(const SubjectRecord& subject, double omega,
                           const Eigen::Vector3d& b,
                           const Eigen::VectorXd& beta, double sigma_y);

/// Weibull proportional-hazards log density
/// log(eta) + log(alpha) + (alpha-1) log t + w'gamma - eta t^alpha e^{w'gamma}.
double weibull_ph_logpdf(double t, const Eigen::VectorXd& w,
                         const Eigen::VectorXd& gamma, double eta,
                         double alpha);

/// Log survival function -eta t^alpha e^{w'gamma}.
double weibull_ph_logsurv(double t, const Eigen::VectorXd& w,
                          const Eigen::VectorXd& gamma, double eta,
                          double alpha);

/// Generalized-normal log kernel -(|x - mu| / alpha)^beta (unnormalized).
double gnd_logpdf(double x, double mu, double alpha, double beta);

/// LKJ log kernel (eta - 1) log det(Gamma) on the correlation matrix itself
/// (unnormalized); exactly 0 when eta = 1.
double correlation_logprior(const Eigen::MatrixXd& Gamma, double eta_lkj);

// ---------------------------------------------------------------------------
// Unconstrained transform for correlation matrices
// ---------------------------------------------------------------------------

/// Cholesky factor of a correlation matrix built from canonical partial
/// correlations z = tanh(y), one y per strictly-lower-triangular entry in
/// row-major order.
struct CorrCholesky {
  Eigen::MatrixXd factor;    // lower Cholesky factor with unit-norm rows
  double log_jacobian = 0.0; // log |d factor / d y|
};

CorrCholesky corr_cholesky_forward(const Eigen::VectorXd& y, int k);

/// Reverse-mode companion: maps a gradient with respect to the factor's
/// lower triangle (diagonal included; entry (0,0) ignored) back to y.
/// When add_jacobian_grad is set, the gradient of log_jacobian is added.
Eigen::VectorXd corr_cholesky_backward(const Eigen::VectorXd& y,
                                       const CorrCholesky& cc,
                                       const Eigen::MatrixXd& grad_factor,
                                       bool add_jacobian_grad);

/// Exact inverse of corr_cholesky_forward given the correlation matrix.
Eigen::VectorXd corr_cholesky_inverse(const Eigen::MatrixXd& corr);

/// log1p(exp(x))-free stable pieces of the logistic decode.
double log_logistic(double z);   // log sigma(z)
inline double logistic(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                  : std::exp(z) / (1.0 + std::exp(z));
}

}  // namespace cpjm
