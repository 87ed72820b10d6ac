#include <cmath>
#include <sstream>

#include "cpjm/posterior.hpp"
#include "posterior_detail.hpp"

namespace cpjm {

using detail::kLog2Pi;

LongitudinalOnlyModel::LongitudinalOnlyModel(std::vector<SubjectRecord> data,
                                             PriorConfig priors)
    : data_(std::move(data)), priors_(priors) {
  if (data_.empty()) throw DataError("longitudinal-only model: no subjects");
  priors_.validate();
  for (const auto& s : data_) s.validate(true);
  px_ = static_cast<int>(data_.front().x.cols());
  dim_ = px_ + 15 + 4 * static_cast<int>(data_.size());
}

double LongitudinalOnlyModel::logpost(const Eigen::VectorXd& u,
                                      Eigen::VectorXd* grad) const {
  if (u.size() != dim_) {
    throw std::invalid_argument("longitudinal logpost: wrong vector length");
  }
  if (grad != nullptr) grad->setZero(dim_);
  if (std::abs(u(off_log_sigma_y())) > 690.0) return -kInf;
  for (int k = 0; k < 4; ++k) {
    if (std::abs(u(off_log_sd() + k)) > 690.0) return -kInf;
  }

  const Eigen::VectorXd beta = u.segment(off_beta(), px_);
  const double sigma_y = std::exp(u(off_log_sigma_y()));
  const double mu_omega = u(off_mu_omega());
  const Eigen::Vector3d mu_b = u.segment(off_mu_b(), 3);
  const Eigen::Vector4d sd = u.segment(off_log_sd(), 4).array().exp();
  const CorrCholesky cc = corr_cholesky_forward(u.segment(off_corr(), 6), 4);
  const Eigen::Matrix4d chol = sd.asDiagonal() * cc.factor;
  const Eigen::Vector3d l21 = chol.block<3, 1>(1, 0);
  const Eigen::Matrix3d l22 = chol.block<3, 3>(1, 1);

  double ranef = 0.0, longit = 0.0, prior = 0.0;
  Eigen::Matrix4d g_chol = Eigen::Matrix4d::Zero();
  double g_mu_omega = 0.0;
  Eigen::Vector3d g_mu_b = Eigen::Vector3d::Zero();

  const int n = static_cast<int>(data_.size());
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector4d z = u.segment(off_z() + 4 * i, 4);
    const double omega = mu_omega + chol(0, 0) * z(0);
    const Eigen::Vector3d b = mu_b + z(0) * l21 + l22 * z.tail(3);
    ranef += -0.5 * z.squaredNorm() - 2.0 * kLog2Pi;

    double d_omega = 0.0, d_logsy = 0.0;
    Eigen::Vector3d d_b = Eigen::Vector3d::Zero();
    Eigen::VectorXd d_beta_local;
    if (grad != nullptr) d_beta_local.setZero(px_);
    longit += detail::longitudinal_term(
        data_[i], omega, b, beta, sigma_y,
        grad != nullptr ? &d_omega : nullptr,
        grad != nullptr ? &d_b : nullptr,
        grad != nullptr ? &d_beta_local : nullptr,
        grad != nullptr ? &d_logsy : nullptr);

    if (grad == nullptr) continue;
    Eigen::VectorXd& g = *grad;
    if (px_ > 0) g.segment(off_beta(), px_) += d_beta_local;
    g(off_log_sigma_y()) += d_logsy;
    g_mu_omega += d_omega;
    g_mu_b += d_b;
    g(off_z() + 4 * i) +=
        chol(0, 0) * d_omega + l21.dot(d_b) - z(0);
    g.segment(off_z() + 4 * i + 1, 3) += l22.transpose() * d_b - z.tail(3);
    g_chol(0, 0) += d_omega * z(0);
    g_chol.block<3, 1>(1, 0) += d_b * z(0);
    g_chol.block<3, 3>(1, 1) += d_b * z.tail(3).transpose();
  }

  prior += -0.5 * beta.squaredNorm() / (priors_.sigma_beta * priors_.sigma_beta);
  prior += -0.5 * sigma_y * sigma_y /
               (priors_.sigma_sigma_y * priors_.sigma_sigma_y) +
           u(off_log_sigma_y());
  prior += detail::gnd_value(mu_omega, priors_.mu_omega);
  prior += detail::gnd_value(mu_b(0), priors_.mu_b0);
  prior += detail::gnd_value(mu_b(1), priors_.mu_b1);
  prior += detail::gnd_value(mu_b(2), priors_.mu_b2);
  const double sd_scale2 = priors_.sd_r_scale * priors_.sd_r_scale;
  for (int k = 0; k < 4; ++k) {
    prior += -0.5 * sd(k) * sd(k) / sd_scale2 + u(off_log_sd() + k);
  }
  prior += cc.log_jacobian;
  for (int j = 1; j < 4; ++j) {
    prior += detail::lkj_chol_exponent(4, j, priors_.lkj_eta) *
             std::log(cc.factor(j, j));
  }

  const double total = ranef + longit + prior;
  if (std::isnan(total)) {
    std::ostringstream oss;
    oss << "longitudinal-only logpost is NaN (random-effects=" << ranef
        << ", longitudinal=" << longit << ", prior=" << prior << ")";
    throw NonFiniteLogpost(oss.str());
  }
  if (total == -kInf || grad == nullptr) return total;

  Eigen::VectorXd& g = *grad;
  if (px_ > 0) {
    g.segment(off_beta(), px_) -=
        beta / (priors_.sigma_beta * priors_.sigma_beta);
  }
  g(off_log_sigma_y()) +=
      -sigma_y * sigma_y / (priors_.sigma_sigma_y * priors_.sigma_sigma_y) + 1.0;
  g(off_mu_omega()) += g_mu_omega + detail::gnd_grad(mu_omega, priors_.mu_omega);
  g(off_mu_b() + 0) += g_mu_b(0) + detail::gnd_grad(mu_b(0), priors_.mu_b0);
  g(off_mu_b() + 1) += g_mu_b(1) + detail::gnd_grad(mu_b(1), priors_.mu_b1);
  g(off_mu_b() + 2) += g_mu_b(2) + detail::gnd_grad(mu_b(2), priors_.mu_b2);

  Eigen::Matrix4d g_factor = Eigen::Matrix4d::Zero();
  Eigen::Vector4d g_sd = Eigen::Vector4d::Zero();
  for (int r = 0; r < 4; ++r) {
    for (int col = 0; col <= r; ++col) {
      g_sd(r) += g_chol(r, col) * cc.factor(r, col);
      g_factor(r, col) += g_chol(r, col) * sd(r);
    }
  }
  for (int k = 0; k < 4; ++k) {
    g(off_log_sd() + k) += g_sd(k) * sd(k) - sd(k) * sd(k) / sd_scale2 + 1.0;
  }
  for (int j = 1; j < 4; ++j) {
    g_factor(j, j) += detail::lkj_chol_exponent(4, j, priors_.lkj_eta) /
                      cc.factor(j, j);
  }
  g.segment(off_corr(), 6) +=
      corr_cholesky_backward(u.segment(off_corr(), 6), cc, g_factor, true);
  return total;
}

std::vector<std::string> LongitudinalOnlyModel::value_names() const {
  std::vector<std::string> names;
  for (int k = 0; k < px_; ++k) names.push_back("beta" + std::to_string(k + 1));
  names.push_back("sigma_y");
  names.push_back("mu_omega");
  names.push_back("mu_b0");
  names.push_back("mu_b1");
  names.push_back("mu_b2");
  names.push_back("sd_omega");
  names.push_back("sd_b0");
  names.push_back("sd_b1");
  names.push_back("sd_b2");
  static const char* var_names[4] = {"omega", "b0", "b1", "b2"};
  for (int i = 1; i < 4; ++i) {
    for (int j = 0; j < i; ++j) {
      names.push_back(std::string("corr_") + var_names[i] + "_" + var_names[j]);
    }
  }
  return names;
}

Eigen::VectorXd LongitudinalOnlyModel::constrained_values(
    const Eigen::VectorXd& u) const {
  const CorrCholesky cc = corr_cholesky_forward(u.segment(off_corr(), 6), 4);
  const Eigen::Matrix4d corr = cc.factor * cc.factor.transpose();
  Eigen::VectorXd v(px_ + 15);
  int k = 0;
  for (int j = 0; j < px_; ++j) v(k++) = u(off_beta() + j);
  v(k++) = std::exp(u(off_log_sigma_y()));
  v(k++) = u(off_mu_omega());
  for (int j = 0; j < 3; ++j) v(k++) = u(off_mu_b() + j);
  for (int j = 0; j < 4; ++j) v(k++) = std::exp(u(off_log_sd() + j));
  for (int i = 1; i < 4; ++i) {
    for (int j = 0; j < i; ++j) v(k++) = corr(i, j);
  }
  return v;
}

Eigen::VectorXd LongitudinalOnlyModel::initial_point(Rng& rng,
                                                     double jitter) const {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(dim_);
  long total_visits = 0;
  for (const auto& s : data_) total_visits += s.n_visits();
  Eigen::VectorXd y_all(total_visits);
  Eigen::MatrixXd x_all(total_visits, px_);
  long row = 0;
  for (const auto& s : data_) {
    for (int j = 0; j < s.n_visits(); ++j, ++row) {
      y_all(row) = s.y(j);
      if (px_ > 0) x_all.row(row) = s.x.row(j);
    }
  }
  Eigen::VectorXd beta0 = Eigen::VectorXd::Zero(px_);
  if (px_ > 0) {
    beta0 = x_all.colPivHouseholderQr().solve(y_all);
    if (!beta0.allFinite()) beta0.setZero();
    u.segment(off_beta(), px_) = beta0;
  }
  Eigen::VectorXd resid = y_all;
  if (px_ > 0) resid -= x_all * beta0;
  const double resid_mean = resid.mean();
  const double resid_sd =
      std::sqrt((resid.array() - resid_mean).square().sum() /
                std::max<long>(1, total_visits - 1));
  u(off_log_sigma_y()) = std::log(std::max(1e-3, resid_sd));
  u(off_mu_omega()) = 0.5;
  u(off_mu_b() + 0) = resid_mean;
  u(off_mu_b() + 1) = -0.5;
  u(off_mu_b() + 2) = 0.5;
  u.segment(off_log_sd(), 4).setConstant(std::log(0.3));
  const int nz = 4 * static_cast<int>(data_.size());
  for (int attempt = 0; attempt < 100; ++attempt) {
    const double scale = std::min(1.0, jitter) * std::pow(0.7, attempt);
    for (int i = 0; i < nz; ++i) u(off_z() + i) = scale * rng.normal();
    if (std::isfinite(logpost(u))) return u;
  }
  throw SamplerError(
      "longitudinal-only model: no finite starting point after 100 tries");
}

}  // namespace cpjm
