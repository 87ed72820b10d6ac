#include "cpjm/model.hpp"

#include <cmath>

namespace cpjm {

void SubjectRecord::validate(bool allow_no_visits) const {
  const auto fail = [&](const std::string& what) {
    throw DataError("subject " + id + ": " + what);
  };
  const int n = n_visits();
  if (n < 1 && !allow_no_visits) fail("has no visits");
  if (y.size() != n) fail("outcome and visit-time lengths differ");
  if (x.size() > 0 && x.rows() != n) fail("covariate rows do not match visits");
  if (!(t_obs > 0.0) || !std::isfinite(t_obs)) fail("observed time not positive");
  if (!s.allFinite() || !y.allFinite() || !w.allFinite() ||
      (x.size() > 0 && !x.allFinite())) {
    fail("non-finite value");
  }
  for (int j = 0; j + 1 < n; ++j) {
    if (!(s(j) < s(j + 1))) fail("visit times not strictly increasing");
  }
  if (n >= 1 && !(s(n - 1) <= t_obs)) fail("visit after the observed time");
}

void ModelParams::validate() const {
  if (!(eta > 0.0) || !(alpha > 0.0) || !(sigma_y > 0.0)) {
    throw std::invalid_argument("ModelParams: eta, alpha, sigma_y must be > 0");
  }
  if (!(sd_r.array() > 0.0).all()) {
    throw std::invalid_argument("ModelParams: random-effect SDs must be > 0");
  }
  if (!Gamma_r.isApprox(Gamma_r.transpose(), 1e-10) ||
      (Gamma_r.diagonal().array() - 1.0).abs().maxCoeff() > 1e-10) {
    throw std::invalid_argument("ModelParams: Gamma_r not a correlation matrix");
  }
  Eigen::LLT<Eigen::Matrix4d> llt(Gamma_r);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("ModelParams: Gamma_r not positive definite");
  }
}

void PriorConfig::validate() const {
  const auto check_gnd = [](const GndPrior& g, const char* name) {
    if (!(g.alpha > 0.0) || !(g.beta >= 1.0)) {
      throw std::invalid_argument(std::string("PriorConfig: GND prior for ") +
                                  name + " needs alpha > 0, beta >= 1");
    }
  };
  check_gnd(mu_omega, "mu_omega");
  check_gnd(mu_b0, "mu_b0");
  check_gnd(mu_b1, "mu_b1");
  check_gnd(mu_b2, "mu_b2");
  if (!(sigma_gamma > 0.0) || !(sigma_beta > 0.0) || !(sigma_eta > 0.0) ||
      !(sigma_alpha > 0.0) || !(sigma_sigma_y > 0.0) || !(sd_r_scale > 0.0) ||
      !(lkj_eta > 0.0)) {
    throw std::invalid_argument("PriorConfig: all scales must be > 0");
  }
}

double longitudinal_loglik(const SubjectRecord& subject, double omega,
                           const Eigen::Vector3d& b,
                           const Eigen::VectorXd& beta, double sigma_y) {
  if (!(sigma_y > 0.0)) {
    throw std::invalid_argument("longitudinal_loglik: sigma_y must be > 0");
  }
  constexpr double kLogSqrt2Pi = 0.91893853320467274178;
  const double inv_var = 1.0 / (sigma_y * sigma_y);
  double ll = 0.0;
  for (int j = 0; j < subject.n_visits(); ++j) {
    const double delta = subject.s(j) - omega;
    double mean = b(0) + (delta <= 0.0 ? b(1) * delta : b(2) * delta);
    if (beta.size() > 0) mean += subject.x.row(j).dot(beta);
    const double e = subject.y(j) - mean;
    ll += -kLogSqrt2Pi - std::log(sigma_y) - 0.5 * e * e * inv_var;
  }
  return ll;
}

double weibull_ph_logpdf(double t, const Eigen::VectorXd& w,
                         const Eigen::VectorXd& gamma, double eta,
                         double alpha) {
  if (!(t > 0.0)) throw std::invalid_argument("weibull_ph_logpdf: t must be > 0");
  if (!(eta > 0.0) || !(alpha > 0.0)) {
    throw std::invalid_argument("weibull_ph_logpdf: eta, alpha must be > 0");
  }
  const double lin = w.size() > 0 ? w.dot(gamma) : 0.0;
  const double log_hazard = std::log(eta) + std::log(alpha) +
                            (alpha - 1.0) * std::log(t) + lin;
  const double log_cum = std::log(eta) + alpha * std::log(t) + lin;
  return log_hazard - std::exp(log_cum);
}

double weibull_ph_logsurv(double t, const Eigen::VectorXd& w,
                          const Eigen::VectorXd& gamma, double eta,
                          double alpha) {
  if (!(t >= 0.0)) throw std::invalid_argument("weibull_ph_logsurv: t must be >= 0");
  if (t == 0.0) return 0.0;
  const double lin = w.size() > 0 ? w.dot(gamma) : 0.0;
  return -std::exp(std::log(eta) + alpha * std::log(t) + lin);
}

double gnd_logpdf(double x, double mu, double alpha, double beta) {
  if (!(alpha > 0.0) || !(beta > 0.0)) {
    throw std::invalid_argument("gnd_logpdf: alpha, beta must be > 0");
  }
  return -std::pow(std::abs(x - mu) / alpha, beta);
}

double correlation_logprior(const Eigen::MatrixXd& Gamma, double eta_lkj) {
  if (!(eta_lkj > 0.0)) {
    throw std::invalid_argument("correlation_logprior: eta must be > 0");
  }
  if (!Gamma.isApprox(Gamma.transpose(), 1e-10) ||
      (Gamma.diagonal().array() - 1.0).abs().maxCoeff() > 1e-10) {
    throw std::invalid_argument("correlation_logprior: not a correlation matrix");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(Gamma);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("correlation_logprior: not positive definite");
  }
  if (eta_lkj == 1.0) return 0.0;
  double logdet = 0.0;
  for (int i = 0; i < Gamma.rows(); ++i) {
    logdet += 2.0 * std::log(llt.matrixL()(i, i));
  }
  return (eta_lkj - 1.0) * logdet;
}

double log_logistic(double z) {
  return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

CorrCholesky corr_cholesky_forward(const Eigen::VectorXd& y, int k) {
  if (y.size() != k * (k - 1) / 2) {
    throw std::invalid_argument("corr_cholesky_forward: wrong y length");
  }
  CorrCholesky out;
  out.factor = Eigen::MatrixXd::Zero(k, k);
  out.factor(0, 0) = 1.0;
  int idx = 0;
  for (int i = 1; i < k; ++i) {
    double ssq = 0.0;
    for (int j = 0; j < i; ++j, ++idx) {
      const double z = std::tanh(y(idx));
      const double s = std::sqrt(1.0 - ssq);
      out.factor(i, j) = z * s;
      ssq += out.factor(i, j) * out.factor(i, j);
      out.log_jacobian += std::log(s) + std::log1p(-z * z);
    }
    out.factor(i, i) = std::sqrt(1.0 - ssq);
  }
  return out;
}

Eigen::VectorXd corr_cholesky_backward(const Eigen::VectorXd& y,
                                       const CorrCholesky& cc,
                                       const Eigen::MatrixXd& grad_factor,
                                       bool add_jacobian_grad) {
  const int k = static_cast<int>(cc.factor.rows());
  Eigen::VectorXd gy = Eigen::VectorXd::Zero(y.size());
  int row_start = 0;
  for (int i = 1; i < k; ++i) {
    // Partial sums ssq_j = sum_{m<j} C(i,m)^2 defining s_j = sqrt(1 - ssq_j).
    std::vector<double> ssq(i + 1, 0.0);
    for (int j = 0; j < i; ++j) {
      ssq[j + 1] = ssq[j] + cc.factor(i, j) * cc.factor(i, j);
    }
    // Reverse pass: C(i,i) = sqrt(1 - ssq_i), then C(i,j) = tanh(y) s_j.
    double g_ssq = grad_factor(i, i) * (-0.5 / cc.factor(i, i));
    for (int j = i - 1; j >= 0; --j) {
      const double s = std::sqrt(1.0 - ssq[j]);
      const double z = cc.factor(i, j) / s;
      const double g_c = grad_factor(i, j) + g_ssq * 2.0 * cc.factor(i, j);
      const double gz = g_c * s;
      double g_ssq_j = g_c * (-0.5 * z / s);
      if (add_jacobian_grad) {
        g_ssq_j += -0.5 / (s * s);      // d log s_j / d ssq_j
        gy(row_start + j) += -2.0 * z;  // d log(1 - z^2) / dy
      }
      gy(row_start + j) += gz * (1.0 - z * z);
      g_ssq += g_ssq_j;
    }
    row_start += i;
  }
  return gy;
}

Eigen::VectorXd corr_cholesky_inverse(const Eigen::MatrixXd& corr) {
  const int k = static_cast<int>(corr.rows());
  Eigen::LLT<Eigen::MatrixXd> llt(corr);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("corr_cholesky_inverse: not positive definite");
  }
  const Eigen::MatrixXd c = llt.matrixL();
  Eigen::VectorXd y(k * (k - 1) / 2);
  int idx = 0;
  for (int i = 1; i < k; ++i) {
    double ssq = 0.0;
    for (int j = 0; j < i; ++j, ++idx) {
      const double s = std::sqrt(1.0 - ssq);
      const double z = c(i, j) / s;
      y(idx) = std::atanh(z);
      ssq += c(i, j) * c(i, j);
    }
  }
  return y;
}

}  // namespace cpjm
