#pragma once

// Shared pieces of the joint and longitudinal-only posteriors: the
// longitudinal likelihood with analytic gradients and small prior helpers.

#include <cmath>

#include <Eigen/Dense>

#include "cpjm/model.hpp"

namespace cpjm::detail {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;
constexpr double kLog2Pi = 1.8378770664093454836;

// Log likelihood of one subject's outcomes given (omega, b). When grad
// pointers are supplied, accumulates d/d omega, d/d b, d/d beta and
// d/d log sigma_y into them (adding, not overwriting).
inline double longitudinal_term(const SubjectRecord& subj, double omega,
                                const Eigen::Vector3d& b,
                                const Eigen::VectorXd& beta, double sigma_y,
                                double* d_omega, Eigen::Vector3d* d_b,
                                Eigen::VectorXd* d_beta,
                                double* d_log_sigma_y) {
  const double inv_var = 1.0 / (sigma_y * sigma_y);
  const double log_sigma = std::log(sigma_y);
  const int px = static_cast<int>(beta.size());
  double ll = 0.0;
  for (int j = 0; j < subj.n_visits(); ++j) {
    const double delta = subj.s(j) - omega;
    const bool pre = delta <= 0.0;
    const double slope = pre ? b(1) : b(2);
    double mean = b(0) + slope * delta;
    if (px > 0) mean += subj.x.row(j).dot(beta);
    const double e = subj.y(j) - mean;
    ll += -kLogSqrt2Pi - log_sigma - 0.5 * e * e * inv_var;
    if (d_omega != nullptr) {
      const double de = e * inv_var;  // d ll / d mean
      *d_omega += -de * slope;        // d mean / d omega = -slope
      (*d_b)(0) += de;
      (*d_b)(pre ? 1 : 2) += de * delta;
      if (px > 0) d_beta->noalias() += de * subj.x.row(j).transpose();
      *d_log_sigma_y += e * e * inv_var - 1.0;
    }
  }
  return ll;
}

inline double gnd_grad(double x, const GndPrior& g) {
  const double d = x - g.mu;
  if (d == 0.0) return 0.0;  // beta >= 1 keeps the derivative defined
  const double a = std::abs(d) / g.alpha;
  return -std::copysign((g.beta / g.alpha) * std::pow(a, g.beta - 1.0), d);
}

inline double gnd_value(double x, const GndPrior& g) {
  return -std::pow(std::abs(x - g.mu) / g.alpha, g.beta);
}

// LKJ exponent on log C(j,j) for the Cholesky-factor parameterization of a
// K x K correlation matrix (0-based row j >= 1).
inline double lkj_chol_exponent(int k, int j, double eta) {
  return static_cast<double>(k - 1 - j) + 2.0 * (eta - 1.0);
}

}  // namespace cpjm::detail
