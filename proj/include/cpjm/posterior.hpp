#pragma once

#include <vector>

#include "cpjm/model.hpp"
#include "cpjm/rng.hpp"

namespace cpjm {

/// Index map of the unconstrained parameter vector for the joint model:
/// structural block first, then per-subject latents. Censored subjects own
/// one extra coordinate for their latent event time; events own none.
struct JointLayout {
  int pw = 0, px = 0, n = 0, n_cens = 0;
  int gamma = 0, log_eta = 0, log_alpha = 0, beta = 0, log_sigma_y = 0;
  int mu_omega = 0, mu_b = 0, log_sd = 0, corr = 0;
  int z_omega = 0, z_b = 0, z_t = 0;
  int dim = 0;
  std::vector<int> cens_slot;  // subject index -> censored slot, -1 for events
};

/// Constrained-scale image of one unconstrained point.
struct DecodedState {
  ModelParams params;
  Eigen::VectorXd omega;  // per subject, in (0, tstar)
  Eigen::VectorXd tstar;  // observed time for events, decoded latent otherwise
  Eigen::MatrixXd b;      // n x 3 random coefficients
  double log_jacobian = 0.0;  // decode Jacobian, excluding the b block (the
                              // posterior is evaluated in z_b space)
};

/// Joint change-point posterior over one unconstrained vector: complete-data
/// likelihood with latent censored times, non-centered random effects, and
/// the weakly informative priors. The b block of the partially truncated
/// normal reduces to a standard normal density of z_b because the decode
/// b = mu_b + (omega - mu_omega) l21 / l11 + L22 z_b reproduces the
/// conditional mean/covariance of b given omega exactly, and the det(L22)
/// change-of-variables term cancels the conditional normal's normalizer.
class JointModel {
 public:
  JointModel(std::vector<SubjectRecord> data, PriorConfig priors);

  int dim() const { return layout_.dim; }
  const JointLayout& layout() const { return layout_; }
  const std::vector<SubjectRecord>& data() const { return data_; }
  const PriorConfig& priors() const { return priors_; }

  /// Log posterior density (with all decode Jacobians) and, when grad is
  /// non-null, its gradient. Returns -inf for states of zero posterior mass;
  /// throws NonFiniteLogpost when the result is NaN, with a component
  /// breakdown (survival / random-effects / longitudinal / prior).
  double logpost(const Eigen::VectorXd& u, Eigen::VectorXd* grad = nullptr) const;

  DecodedState decode(const Eigen::VectorXd& u) const;
  /// Exact inverse of decode.
  Eigen::VectorXd encode(const DecodedState& state) const;

  std::vector<std::string> value_names(bool include_latent = false) const;
  Eigen::VectorXd constrained_values(const Eigen::VectorXd& u,
                                     bool include_latent = false) const;

  /// Data-informed starting point with jittered latents; retries until the
  /// log posterior is finite (at most 100 times), then throws SamplerError.
  Eigen::VectorXd initial_point(Rng& rng, double jitter) const;

 private:
  std::vector<SubjectRecord> data_;
  PriorConfig priors_;
  JointLayout layout_;
};

double joint_logpost(const JointModel& model, const Eigen::VectorXd& u);
/// Gradient with a finite-difference-checkable contract: throws
/// NonFiniteLogpost naming the first offending coordinate if any entry is
/// not finite.
Eigen::VectorXd joint_logpost_grad(const JointModel& model,
                                   const Eigen::VectorXd& u);

/// Baseline with unbounded random effects (omega_i, b_i) ~ N_4(mu, Sigma),
/// the same outcome model and priors, and no survival component.
class LongitudinalOnlyModel {
 public:
  LongitudinalOnlyModel(std::vector<SubjectRecord> data, PriorConfig priors);

  int dim() const { return dim_; }
  const std::vector<SubjectRecord>& data() const { return data_; }

  double logpost(const Eigen::VectorXd& u, Eigen::VectorXd* grad = nullptr) const;
  std::vector<std::string> value_names() const;
  Eigen::VectorXd constrained_values(const Eigen::VectorXd& u) const;
  Eigen::VectorXd initial_point(Rng& rng, double jitter) const;

  // Offsets into the unconstrained vector.
  int off_beta() const { return 0; }
  int off_log_sigma_y() const { return px_; }
  int off_mu_omega() const { return px_ + 1; }
  int off_mu_b() const { return px_ + 2; }
  int off_log_sd() const { return px_ + 5; }
  int off_corr() const { return px_ + 9; }
  int off_z() const { return px_ + 15; }

 private:
  std::vector<SubjectRecord> data_;
  PriorConfig priors_;
  int px_ = 0;
  int dim_ = 0;
};

}  // namespace cpjm
