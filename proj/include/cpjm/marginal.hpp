#pragma once

#include <Eigen/Dense>

#include "cpjm/ptmvn.hpp"

namespace cpjm {

/// Random-effect design rows z_j = (1, Delta_j 1{Delta_j <= 0},
/// Delta_j 1{Delta_j >= 0}) with Delta_j = s_j - omega.
Eigen::MatrixXd make_design_z(const Eigen::VectorXd& s, double omega);

struct ExpectedZ {
  Eigen::MatrixXd ez;   // n x 3, entrywise E[Z]
  Eigen::MatrixXd ewz;  // n x 3, entrywise E[omega Z]
};

/// Entrywise expectations of the design matrix and its omega-weighted
/// version under omega ~ TN(tn), via the partial-moment identity with the
/// indicator split at Delta = 0.
ExpectedZ expected_Z(const Eigen::VectorXd& s, const TruncNormParams& tn);

/// Closed-form marginal mean of the outcomes given the event time:
/// X beta + E[Z](mu_b - mu_omega sigma_bw / sigma_w^2)
///        + E[omega Z] sigma_bw / sigma_w^2.
Eigen::VectorXd marginal_mean_y(const Eigen::MatrixXd& x,
                                const Eigen::VectorXd& s,
                                const Eigen::VectorXd& beta,
                                const PtmvnParams& ranef);

/// Monte Carlo marginal covariance of the outcomes given the event time.
/// Decomposition: Cov(y) = sigma_y^2 I + E[Z Sigma_{b|w} Z']
///                        + Cov(Z mu_{b|w}); the last term (variability of
/// the conditional mean through omega) is included when include_mean_variation
/// is set and omitted otherwise, exposing the conditional-covariance
/// component on its own.
Eigen::MatrixXd marginal_cov_y_mc(const Eigen::MatrixXd& x,
                                  const Eigen::VectorXd& s,
                                  const PtmvnParams& ranef, double sigma_y,
                                  long draws, Rng& rng,
                                  bool include_mean_variation = true);

/// Population mean change point: integral of the truncated-normal mean
/// E[omega | t* = t] against the Weibull PH event-time density, computed by
/// adaptive quadrature on a log-transformed unit interval to abs tol 1e-6.
/// w_cov holds fixed survival covariates; pass several rows to average over
/// an empirical covariate sample.
double population_mean_changepoint(double mu_omega, double sigma_omega,
                                   const Eigen::VectorXd& gamma, double eta,
                                   double alpha,
                                   const Eigen::MatrixXd& w_cov);

}  // namespace cpjm
