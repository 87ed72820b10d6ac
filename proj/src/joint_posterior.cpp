#include <cmath>
#include <sstream>

#include "cpjm/posterior.hpp"
#include "posterior_detail.hpp"

namespace cpjm {

namespace {

using detail::kLog2Pi;

JointLayout make_layout(const std::vector<SubjectRecord>& data) {
  JointLayout l;
  l.n = static_cast<int>(data.size());
  l.px = data.empty() ? 0 : static_cast<int>(data.front().x.cols());
  l.pw = data.empty() ? 0 : static_cast<int>(data.front().w.size());
  l.cens_slot.assign(l.n, -1);
  for (int i = 0; i < l.n; ++i) {
    if (!data[i].event) l.cens_slot[i] = l.n_cens++;
  }
  int off = 0;
  l.gamma = off; off += l.pw;
  l.log_eta = off++;
  l.log_alpha = off++;
  l.beta = off; off += l.px;
  l.log_sigma_y = off++;
  l.mu_omega = off++;
  l.mu_b = off; off += 3;
  l.log_sd = off; off += 4;
  l.corr = off; off += 6;
  l.z_omega = off; off += l.n;
  l.z_b = off; off += 3 * l.n;
  l.z_t = off; off += l.n_cens;
  l.dim = off;
  return l;
}

constexpr double kExpBound = 690.0;  // exp() overflow guard on log-scale pars

}  // namespace

JointModel::JointModel(std::vector<SubjectRecord> data, PriorConfig priors)
    : data_(std::move(data)), priors_(priors) {
  if (data_.empty()) throw DataError("joint model: no subjects");
  priors_.validate();
  for (const auto& s : data_) {
    s.validate(true);
    if (static_cast<int>(s.x.cols()) != static_cast<int>(data_.front().x.cols()) ||
        s.w.size() != data_.front().w.size()) {
      throw DataError("subject " + s.id + ": covariate dimension differs");
    }
  }
  layout_ = make_layout(data_);
}

double JointModel::logpost(const Eigen::VectorXd& u,
                           Eigen::VectorXd* grad) const {
  const JointLayout& L = layout_;
  if (u.size() != L.dim) {
    throw std::invalid_argument("joint logpost: wrong vector length");
  }
  if (grad != nullptr) grad->setZero(L.dim);

  // --- structural decode ------------------------------------------------
  for (int k : {L.log_eta, L.log_alpha, L.log_sigma_y}) {
    if (std::abs(u(k)) > kExpBound) return -kInf;
  }
  for (int k = 0; k < 4; ++k) {
    if (std::abs(u(L.log_sd + k)) > kExpBound) return -kInf;
  }
  const Eigen::VectorXd gamma = u.segment(L.gamma, L.pw);
  const double log_eta = u(L.log_eta), eta = std::exp(log_eta);
  const double log_alpha = u(L.log_alpha), alpha = std::exp(log_alpha);
  const Eigen::VectorXd beta = u.segment(L.beta, L.px);
  const double sigma_y = std::exp(u(L.log_sigma_y));
  const double mu_omega = u(L.mu_omega);
  const Eigen::Vector3d mu_b = u.segment(L.mu_b, 3);
  const Eigen::Vector4d sd = u.segment(L.log_sd, 4).array().exp();
  const CorrCholesky cc = corr_cholesky_forward(u.segment(L.corr, 6), 4);
  const Eigen::Matrix4d chol = sd.asDiagonal() * cc.factor;
  const double sigma_omega = chol(0, 0);  // = sd(0), first factor row is e1
  const Eigen::Vector3d l21 = chol.block<3, 1>(1, 0);
  const Eigen::Matrix3d l22 = chol.block<3, 3>(1, 1);
  const double lambda = -mu_omega / sigma_omega;

  double surv = 0.0, ranef = 0.0, longit = 0.0, prior = 0.0;

  // Gradient accumulators for quantities feeding the scale/correlation
  // backward passes.
  Eigen::Matrix4d g_chol = Eigen::Matrix4d::Zero();
  double g_mu_omega = 0.0, g_sigma_omega = 0.0;
  Eigen::Vector3d g_mu_b = Eigen::Vector3d::Zero();

  // --- per-subject terms --------------------------------------------------
  for (int i = 0; i < L.n; ++i) {
    const SubjectRecord& subj = data_[i];
    const int slot = L.cens_slot[i];
    double tstar = subj.t_obs;
    double z_t = 0.0;
    if (slot >= 0) {
      z_t = u(L.z_t + slot);
      if (z_t > kExpBound) return -kInf;
      tstar = subj.t_obs + std::exp(z_t);
    }
    const double z_w = u(L.z_omega + i);
    const double sig = logistic(z_w);
    const double omega = tstar * sig;
    const Eigen::Vector3d z_b = u.segment(L.z_b + 3 * i, 3);
    const double c = (omega - mu_omega) / sigma_omega;
    const Eigen::Vector3d b = mu_b + c * l21 + l22 * z_b;

    // Survival density of the (possibly latent) event time.
    const double lin = L.pw > 0 ? subj.w.dot(gamma) : 0.0;
    const double log_cum = log_eta + alpha * std::log(tstar) + lin;
    if (log_cum > kExpBound) return -kInf;
    const double cum_hazard = std::exp(log_cum);
    surv += log_eta + log_alpha + (alpha - 1.0) * std::log(tstar) + lin -
            cum_hazard;

    // Truncated-normal density of omega on (0, tstar); the b block enters
    // as a standard normal in z_b (see class comment).
    const double zeta = (omega - mu_omega) / sigma_omega;
    const double upsilon = (tstar - mu_omega) / sigma_omega;
    const double log_z = log_normal_mass(lambda, upsilon);
    ranef += -std::log(sigma_omega) - 0.5 * zeta * zeta - kLog2Pi / 2.0 - log_z;
    ranef += -0.5 * z_b.squaredNorm() - 1.5 * kLog2Pi;

    // Decode Jacobians: omega = tstar * logistic(z_w), censored
    // tstar = t_obs + exp(z_t).
    const double log_sig = log_logistic(z_w);
    const double log_1msig = log_logistic(-z_w);
    ranef += std::log(tstar) + log_sig + log_1msig;
    if (slot >= 0) ranef += z_t;

    // Longitudinal outcomes.
    double d_omega_dir = 0.0, d_logsy = 0.0;
    Eigen::Vector3d d_b = Eigen::Vector3d::Zero();
    Eigen::VectorXd d_beta_local;
    if (grad != nullptr) d_beta_local.setZero(L.px);
    longit += detail::longitudinal_term(
        subj, omega, b, beta, sigma_y,
        grad != nullptr ? &d_omega_dir : nullptr,
        grad != nullptr ? &d_b : nullptr,
        grad != nullptr ? &d_beta_local : nullptr,
        grad != nullptr ? &d_logsy : nullptr);

    if (grad == nullptr) continue;

    // ---- gradient assembly for this subject ----
    Eigen::VectorXd& g = *grad;
    if (L.px > 0) g.segment(L.beta, L.px) += d_beta_local;
    g(L.log_sigma_y) += d_logsy;

    // Survival.
    g(L.log_eta) += 1.0 - cum_hazard;
    g(L.log_alpha) += 1.0 + alpha * std::log(tstar) * (1.0 - cum_hazard);
    if (L.pw > 0) g.segment(L.gamma, L.pw) += subj.w * (1.0 - cum_hazard);
    double d_tstar = (alpha - 1.0) / tstar - cum_hazard * alpha / tstar;

    // Truncated normal for omega; ratios phi/Z computed in log space so far
    // tails stay finite.
    const double r_hi = std::exp(std_normal_logpdf(upsilon) - log_z);
    const double r_lo = std::exp(std_normal_logpdf(lambda) - log_z);
    const double d_omega_tn = -zeta / sigma_omega;
    g_mu_omega += zeta / sigma_omega + (r_hi - r_lo) / sigma_omega;
    g_sigma_omega += (zeta * zeta - 1.0) / sigma_omega +
                     (r_hi * upsilon - r_lo * lambda) / sigma_omega;
    d_tstar += -r_hi / sigma_omega;

    // b decode: b = mu_b + c l21 + l22 z_b with c = (omega - mu_omega)/l11.
    const double l21_dot_gb = l21.dot(d_b);
    g_mu_b += d_b;
    g.segment(L.z_b + 3 * i, 3) += l22.transpose() * d_b - z_b;
    g_chol(0, 0) += -(c / sigma_omega) * l21_dot_gb;
    g_chol.block<3, 1>(1, 0) += c * d_b;
    g_chol.block<3, 3>(1, 1) += d_b * z_b.transpose();
    const double d_omega_total = d_omega_dir + d_omega_tn + l21_dot_gb / sigma_omega;
    g_mu_omega += -l21_dot_gb / sigma_omega;

    // omega and tstar decode chains (Jacobian terms included).
    g(L.z_omega + i) += d_omega_total * tstar * sig * (1.0 - sig) + (1.0 - 2.0 * sig);
    d_tstar += d_omega_total * sig + 1.0 / tstar;
    if (slot >= 0) g(L.z_t + slot) += d_tstar * (tstar - subj.t_obs) + 1.0;
  }

  // --- priors and structural Jacobians -----------------------------------
  prior += -0.5 * gamma.squaredNorm() / (priors_.sigma_gamma * priors_.sigma_gamma);
  prior += -0.5 * eta * eta / (priors_.sigma_eta * priors_.sigma_eta) + log_eta;
  prior += -0.5 * alpha * alpha / (priors_.sigma_alpha * priors_.sigma_alpha) +
           log_alpha;
  prior += -0.5 * beta.squaredNorm() / (priors_.sigma_beta * priors_.sigma_beta);
  prior += -0.5 * sigma_y * sigma_y /
               (priors_.sigma_sigma_y * priors_.sigma_sigma_y) +
           u(L.log_sigma_y);
  prior += detail::gnd_value(mu_omega, priors_.mu_omega);
  prior += detail::gnd_value(mu_b(0), priors_.mu_b0);
  prior += detail::gnd_value(mu_b(1), priors_.mu_b1);
  prior += detail::gnd_value(mu_b(2), priors_.mu_b2);
  const double sd_scale2 = priors_.sd_r_scale * priors_.sd_r_scale;
  for (int k = 0; k < 4; ++k) {
    prior += -0.5 * sd(k) * sd(k) / sd_scale2 + u(L.log_sd + k);
  }
  prior += cc.log_jacobian;
  for (int j = 1; j < 4; ++j) {
    prior += detail::lkj_chol_exponent(4, j, priors_.lkj_eta) *
             std::log(cc.factor(j, j));
  }

  const double total = surv + ranef + longit + prior;
  if (std::isnan(total)) {
    std::ostringstream oss;
    oss << "joint logpost is NaN (survival=" << surv
        << ", random-effects=" << ranef << ", longitudinal=" << longit
        << ", prior=" << prior << ")";
    throw NonFiniteLogpost(oss.str());
  }
  if (total == -kInf || grad == nullptr) return total;

  // --- structural prior gradients and the scale/correlation backward pass --
  Eigen::VectorXd& g = *grad;
  if (L.pw > 0) {
    g.segment(L.gamma, L.pw) -=
        gamma / (priors_.sigma_gamma * priors_.sigma_gamma);
  }
  g(L.log_eta) += -eta * eta / (priors_.sigma_eta * priors_.sigma_eta) + 1.0;
  g(L.log_alpha) +=
      -alpha * alpha / (priors_.sigma_alpha * priors_.sigma_alpha) + 1.0;
  if (L.px > 0) {
    g.segment(L.beta, L.px) -= beta / (priors_.sigma_beta * priors_.sigma_beta);
  }
  g(L.log_sigma_y) +=
      -sigma_y * sigma_y / (priors_.sigma_sigma_y * priors_.sigma_sigma_y) + 1.0;
  g(L.mu_omega) += g_mu_omega + detail::gnd_grad(mu_omega, priors_.mu_omega);
  g(L.mu_b + 0) += g_mu_b(0) + detail::gnd_grad(mu_b(0), priors_.mu_b0);
  g(L.mu_b + 1) += g_mu_b(1) + detail::gnd_grad(mu_b(1), priors_.mu_b1);
  g(L.mu_b + 2) += g_mu_b(2) + detail::gnd_grad(mu_b(2), priors_.mu_b2);

  // chol = diag(sd) * factor: split gradients between the two.
  Eigen::Matrix4d g_factor = Eigen::Matrix4d::Zero();
  Eigen::Vector4d g_sd = Eigen::Vector4d::Zero();
  g_sd(0) += g_sigma_omega;
  for (int r = 0; r < 4; ++r) {
    for (int col = 0; col <= r; ++col) {
      g_sd(r) += g_chol(r, col) * cc.factor(r, col);
      g_factor(r, col) += g_chol(r, col) * sd(r);
    }
  }
  for (int k = 0; k < 4; ++k) {
    g(L.log_sd + k) += g_sd(k) * sd(k) - sd(k) * sd(k) / sd_scale2 + 1.0;
  }
  for (int j = 1; j < 4; ++j) {
    g_factor(j, j) += detail::lkj_chol_exponent(4, j, priors_.lkj_eta) /
                      cc.factor(j, j);
  }
  g.segment(L.corr, 6) +=
      corr_cholesky_backward(u.segment(L.corr, 6), cc, g_factor, true);

  return total;
}

DecodedState JointModel::decode(const Eigen::VectorXd& u) const {
  const JointLayout& L = layout_;
  if (u.size() != L.dim) {
    throw std::invalid_argument("decode: wrong vector length");
  }
  for (int k = 0; k < L.dim; ++k) {
    if (!std::isfinite(u(k))) {
      throw std::invalid_argument("decode: non-finite value at coordinate " +
                                  std::to_string(k));
    }
  }
  DecodedState st;
  st.params.gamma = u.segment(L.gamma, L.pw);
  st.params.eta = std::exp(u(L.log_eta));
  st.params.alpha = std::exp(u(L.log_alpha));
  st.params.beta = u.segment(L.beta, L.px);
  st.params.sigma_y = std::exp(u(L.log_sigma_y));
  st.params.mu_omega = u(L.mu_omega);
  st.params.mu_b = u.segment(L.mu_b, 3);
  st.params.sd_r = u.segment(L.log_sd, 4).array().exp();
  const CorrCholesky cc = corr_cholesky_forward(u.segment(L.corr, 6), 4);
  st.params.Gamma_r = cc.factor * cc.factor.transpose();
  st.params.Gamma_r.diagonal().setOnes();

  double logjac = u(L.log_eta) + u(L.log_alpha) + u(L.log_sigma_y) +
                  u.segment(L.log_sd, 4).sum() + cc.log_jacobian;
  const Eigen::Matrix4d chol = st.params.sd_r.asDiagonal() * cc.factor;
  const Eigen::Vector3d l21 = chol.block<3, 1>(1, 0);
  const Eigen::Matrix3d l22 = chol.block<3, 3>(1, 1);
  st.omega.resize(L.n);
  st.tstar.resize(L.n);
  st.b.resize(L.n, 3);
  for (int i = 0; i < L.n; ++i) {
    const int slot = L.cens_slot[i];
    double tstar = data_[i].t_obs;
    if (slot >= 0) {
      const double z_t = u(L.z_t + slot);
      tstar += std::exp(z_t);
      logjac += z_t;
    }
    const double z_w = u(L.z_omega + i);
    const double sig = logistic(z_w);
    st.tstar(i) = tstar;
    st.omega(i) = tstar * sig;
    logjac += std::log(tstar) + log_logistic(z_w) + log_logistic(-z_w);
    const double c = (st.omega(i) - st.params.mu_omega) / chol(0, 0);
    st.b.row(i) = (st.params.mu_b + c * l21 +
                   l22 * u.segment(L.z_b + 3 * i, 3)).transpose();
  }
  st.log_jacobian = logjac;
  if (!std::isfinite(logjac) || !st.omega.allFinite() || !st.b.allFinite()) {
    throw std::invalid_argument("decode: produced a non-finite state");
  }
  return st;
}

Eigen::VectorXd JointModel::encode(const DecodedState& st) const {
  const JointLayout& L = layout_;
  Eigen::VectorXd u(L.dim);
  u.segment(L.gamma, L.pw) = st.params.gamma;
  u(L.log_eta) = std::log(st.params.eta);
  u(L.log_alpha) = std::log(st.params.alpha);
  u.segment(L.beta, L.px) = st.params.beta;
  u(L.log_sigma_y) = std::log(st.params.sigma_y);
  u(L.mu_omega) = st.params.mu_omega;
  u.segment(L.mu_b, 3) = st.params.mu_b;
  u.segment(L.log_sd, 4) = st.params.sd_r.array().log();
  u.segment(L.corr, 6) = corr_cholesky_inverse(st.params.Gamma_r);
  const CorrCholesky cc = corr_cholesky_forward(u.segment(L.corr, 6), 4);
  const Eigen::Matrix4d chol = st.params.sd_r.asDiagonal() * cc.factor;
  const Eigen::Vector3d l21 = chol.block<3, 1>(1, 0);
  const Eigen::Matrix3d l22 = chol.block<3, 3>(1, 1);
  for (int i = 0; i < L.n; ++i) {
    const int slot = L.cens_slot[i];
    if (slot >= 0) u(L.z_t + slot) = std::log(st.tstar(i) - data_[i].t_obs);
    u(L.z_omega + i) = std::log(st.omega(i) / (st.tstar(i) - st.omega(i)));
    const double c = (st.omega(i) - st.params.mu_omega) / chol(0, 0);
    const Eigen::Vector3d resid =
        st.b.row(i).transpose() - st.params.mu_b - c * l21;
    u.segment(L.z_b + 3 * i, 3) =
        l22.triangularView<Eigen::Lower>().solve(resid);
  }
  return u;
}

std::vector<std::string> JointModel::value_names(bool include_latent) const {
  const JointLayout& L = layout_;
  std::vector<std::string> names;
  for (int k = 0; k < L.pw; ++k) names.push_back("gamma" + std::to_string(k + 1));
  names.push_back("eta");
  names.push_back("alpha");
  for (int k = 0; k < L.px; ++k) names.push_back("beta" + std::to_string(k + 1));
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
  if (include_latent) {
    for (int i = 0; i < L.n; ++i) names.push_back("omega_" + std::to_string(i + 1));
    for (int i = 0; i < L.n; ++i) names.push_back("tstar_" + std::to_string(i + 1));
  }
  return names;
}

Eigen::VectorXd JointModel::constrained_values(const Eigen::VectorXd& u,
                                               bool include_latent) const {
  const DecodedState st = decode(u);
  const JointLayout& L = layout_;
  const int n_struct = L.pw + 2 + L.px + 1 + 4 + 4 + 6;
  Eigen::VectorXd v(include_latent ? n_struct + 2 * L.n : n_struct);
  int k = 0;
  for (int j = 0; j < L.pw; ++j) v(k++) = st.params.gamma(j);
  v(k++) = st.params.eta;
  v(k++) = st.params.alpha;
  for (int j = 0; j < L.px; ++j) v(k++) = st.params.beta(j);
  v(k++) = st.params.sigma_y;
  v(k++) = st.params.mu_omega;
  for (int j = 0; j < 3; ++j) v(k++) = st.params.mu_b(j);
  for (int j = 0; j < 4; ++j) v(k++) = st.params.sd_r(j);
  for (int i = 1; i < 4; ++i) {
    for (int j = 0; j < i; ++j) v(k++) = st.params.Gamma_r(i, j);
  }
  if (include_latent) {
    for (int i = 0; i < L.n; ++i) v(k++) = st.omega(i);
    for (int i = 0; i < L.n; ++i) v(k++) = st.tstar(i);
  }
  return v;
}

Eigen::VectorXd JointModel::initial_point(Rng& rng, double jitter) const {
  const JointLayout& L = layout_;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(L.dim);

  // Pooled least squares for beta, residual scale for sigma_y.
  long total_visits = 0;
  for (const auto& s : data_) total_visits += s.n_visits();
  Eigen::VectorXd y_all(total_visits);
  Eigen::MatrixXd x_all(total_visits, L.px);
  long row = 0;
  for (const auto& s : data_) {
    for (int j = 0; j < s.n_visits(); ++j, ++row) {
      y_all(row) = s.y(j);
      if (L.px > 0) x_all.row(row) = s.x.row(j);
    }
  }
  Eigen::VectorXd beta0 = Eigen::VectorXd::Zero(L.px);
  if (L.px > 0) {
    beta0 = x_all.colPivHouseholderQr().solve(y_all);
    if (!beta0.allFinite()) beta0.setZero();
    u.segment(L.beta, L.px) = beta0;
  }
  Eigen::VectorXd resid = y_all;
  if (L.px > 0) resid -= x_all * beta0;
  const double resid_mean = resid.mean();
  const double resid_sd = std::sqrt(
      (resid.array() - resid_mean).square().sum() /
      std::max<long>(1, total_visits - 1));
  u(L.log_sigma_y) = std::log(std::max(1e-3, resid_sd));

  // Exponential-rate start for the hazard; unit shape.
  double t_sum = 0.0;
  int n_events = 0;
  for (const auto& s : data_) {
    t_sum += s.t_obs;
    n_events += s.event ? 1 : 0;
  }
  const double rate = std::max(0.01, static_cast<double>(std::max(1, n_events)) / t_sum);
  u(L.log_eta) = std::log(rate);
  u(L.log_alpha) = 0.0;

  u(L.mu_omega) = 0.5;
  u(L.mu_b + 0) = resid_mean;
  u(L.mu_b + 1) = -0.5;
  u(L.mu_b + 2) = 0.5;
  u.segment(L.log_sd, 4).setConstant(std::log(0.3));

  for (int attempt = 0; attempt < 100; ++attempt) {
    const double scale = jitter * std::pow(0.7, attempt);
    for (int i = 0; i < L.n; ++i) u(L.z_omega + i) = scale * rng.normal();
    for (int i = 0; i < 3 * L.n; ++i) u(L.z_b + i) = scale * rng.normal();
    for (int i = 0; i < L.n; ++i) {
      const int slot = L.cens_slot[i];
      if (slot >= 0) {
        u(L.z_t + slot) = std::log(std::max(0.05, 0.25 * data_[i].t_obs));
      }
    }
    if (std::isfinite(logpost(u))) return u;
  }
  throw SamplerError("joint model: no finite starting point after 100 tries");
}

double joint_logpost(const JointModel& model, const Eigen::VectorXd& u) {
  return model.logpost(u);
}

Eigen::VectorXd joint_logpost_grad(const JointModel& model,
                                   const Eigen::VectorXd& u) {
  Eigen::VectorXd g(model.dim());
  const double lp = model.logpost(u, &g);
  if (!std::isfinite(lp)) {
    throw NonFiniteLogpost("joint_logpost_grad: log posterior not finite");
  }
  for (int k = 0; k < g.size(); ++k) {
    if (!std::isfinite(g(k))) {
      throw NonFiniteLogpost("joint_logpost_grad: non-finite gradient at "
                             "coordinate " + std::to_string(k));
    }
  }
  return g;
}

}  // namespace cpjm
