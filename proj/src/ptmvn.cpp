#include "cpjm/ptmvn.hpp"

#include <cmath>

namespace cpjm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

Eigen::LLT<Eigen::MatrixXd> cholesky_or_throw(const Eigen::MatrixXd& m,
                                              const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument(std::string(what) +
                                ": matrix is not positive definite");
  }
  return llt;
}

// Sampling factor A with A A' = cov, tolerating tiny negative eigenvalues
// from rank-1 downdates.
Eigen::MatrixXd psd_sampling_factor(const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  Eigen::VectorXd ev = es.eigenvalues();
  for (int i = 0; i < ev.size(); ++i) {
    if (ev(i) < -1e-10) {
      throw std::invalid_argument(
          "conditional covariance has eigenvalue below -1e-10");
    }
    ev(i) = std::max(ev(i), 0.0);
  }
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
}

}  // namespace

void PtmvnParams::validate() const {
  const int q = dim();
  if (q < 1 || Sigma.rows() != q || Sigma.cols() != q) {
    throw std::invalid_argument("PtmvnParams: dimension mismatch");
  }
  if (!Sigma.isApprox(Sigma.transpose(), 1e-12)) {
    throw std::invalid_argument("PtmvnParams: Sigma not symmetric");
  }
  cholesky_or_throw(Sigma, "PtmvnParams");
  if (!(lower < upper)) {
    throw std::invalid_argument("PtmvnParams: requires lower < upper");
  }
  omega_marginal().validate();  // throws DegenerateTruncation on empty mass
}

double ptmvn_logpdf(const Eigen::VectorXd& r, const PtmvnParams& p) {
  p.validate();
  if (r.size() != p.dim()) {
    throw std::invalid_argument("ptmvn_logpdf: point has wrong dimension");
  }
  if (!(r(0) > p.lower && r(0) < p.upper)) return -kInf;
  const auto llt = cholesky_or_throw(p.Sigma, "ptmvn_logpdf");
  const Eigen::VectorXd d = r - p.mu;
  const Eigen::VectorXd half = llt.matrixL().solve(d);
  double logdet = 0.0;
  for (int i = 0; i < p.dim(); ++i) logdet += std::log(llt.matrixL()(i, i));
  const double mvn = -0.5 * p.dim() * kLog2Pi - logdet - 0.5 * half.squaredNorm();
  return mvn - log_normal_mass(p.lambda(), p.upsilon());
}

ConditionalNormal cond_b_given_omega(double omega, const PtmvnParams& p) {
  p.validate();
  if (!(omega > p.lower && omega < p.upper)) {
    throw std::invalid_argument(
        "cond_b_given_omega: omega outside the truncation interval");
  }
  const int q = p.dim();
  const double s2 = p.Sigma(0, 0);
  const Eigen::VectorXd sig_bw = p.Sigma.block(1, 0, q - 1, 1);
  ConditionalNormal out;
  out.mean = p.mu.tail(q - 1) + sig_bw * ((omega - p.mu(0)) / s2);
  out.cov = p.Sigma.block(1, 1, q - 1, q - 1) -
            (sig_bw * sig_bw.transpose()) / s2;
  return out;
}

TruncNormParams cond_omega_given_b(const Eigen::VectorXd& b,
                                   const PtmvnParams& p) {
  p.validate();
  const int q = p.dim();
  if (b.size() != q - 1) {
    throw std::invalid_argument("cond_omega_given_b: b has wrong dimension");
  }
  const Eigen::MatrixXd Sigma_b = p.Sigma.block(1, 1, q - 1, q - 1);
  const Eigen::VectorXd sig_bw = p.Sigma.block(1, 0, q - 1, 1);
  const auto llt = cholesky_or_throw(Sigma_b, "cond_omega_given_b");
  const Eigen::VectorXd w = llt.solve(sig_bw);
  const double mu_cond = p.mu(0) + w.dot(b - p.mu.tail(q - 1));
  const double var_cond = p.Sigma(0, 0) - w.dot(sig_bw);
  if (!(var_cond > 0.0)) {
    throw std::invalid_argument(
        "cond_omega_given_b: conditional variance not positive");
  }
  return {mu_cond, std::sqrt(var_cond), p.lower, p.upper};
}

Eigen::VectorXd ptmvn_sample(Rng& rng, const PtmvnParams& p) {
  p.validate();
  const int q = p.dim();
  Eigen::VectorXd r(q);
  r(0) = tn_sample(rng, p.omega_marginal());
  if (q == 1) return r;
  const ConditionalNormal cond = cond_b_given_omega(r(0), p);
  const Eigen::MatrixXd A = psd_sampling_factor(cond.cov);
  Eigen::VectorXd z(q - 1);
  for (int i = 0; i < q - 1; ++i) z(i) = rng.normal();
  r.tail(q - 1) = cond.mean + A * z;
  return r;
}

double ptmvn_log_mgf(const Eigen::VectorXd& t, const PtmvnParams& p) {
  p.validate();
  if (t.size() != p.dim() || !t.allFinite()) {
    throw std::invalid_argument("ptmvn_mgf: bad argument vector");
  }
  const Eigen::VectorXd q_vec = p.Sigma.col(0) / p.sigma_omega();
  const double shift = t.dot(q_vec);
  const double log_c =
      log_normal_mass(p.lambda() - shift, p.upsilon() - shift);
  const double log_normal_part = t.dot(p.mu) + 0.5 * t.dot(p.Sigma * t);
  return log_c - log_normal_mass(p.lambda(), p.upsilon()) + log_normal_part;
}

double ptmvn_mgf(const Eigen::VectorXd& t, const PtmvnParams& p) {
  const double lm = ptmvn_log_mgf(t, p);
  if (lm > 709.0) {
    throw std::overflow_error("ptmvn_mgf overflows; log-MGF = " +
                              std::to_string(lm));
  }
  return std::exp(lm);
}

Eigen::VectorXd ptmvn_mean(const PtmvnParams& p) {
  p.validate();
  const double lam = p.lambda(), ups = p.upsilon();
  const double log_z = log_normal_mass(lam, ups);
  // phi/Z ratios in log space so deep-tail truncations stay finite.
  const double r_hi = std::exp(std_normal_logpdf(ups) - log_z);
  const double r_lo = std::exp(std_normal_logpdf(lam) - log_z);
  return p.mu - (r_hi - r_lo) * (p.Sigma.col(0) / p.sigma_omega());
}

double partial_moment(int m, int k, double s, double alpha, double beta,
                      const TruncNormParams& tn) {
  if (m < 0 || k < 0) throw std::invalid_argument("partial_moment: m, k >= 0");
  if (!(alpha < beta)) throw std::invalid_argument("partial_moment: alpha < beta");
  tn.validate();
  // {alpha <= s - omega <= beta} intersected with the TN support.
  const double lo = std::max(tn.a, s - beta);
  const double hi = std::min(tn.b, s - alpha);
  if (!(lo < hi)) return 0.0;
  const double lo_std = (lo - tn.mu) / tn.sigma;
  const double hi_std = (hi - tn.mu) / tn.sigma;
  const double num_mass = normal_mass(lo_std, hi_std);
  if (num_mass < 1e-300) return 0.0;
  const double prefactor = num_mass / normal_mass(tn.lo_std(), tn.hi_std());
  const TruncNormParams inner{tn.mu, tn.sigma, lo, hi};
  double sum = 0.0;
  double binom = 1.0;  // C(k, l)
  for (int l = 0; l <= k; ++l) {
    const double sign = (l % 2 == 0) ? 1.0 : -1.0;
    const double s_pow = (k - l == 0) ? 1.0 : std::pow(s, k - l);
    sum += binom * sign * s_pow * tn_moment(m + l, inner);
    binom = binom * (k - l) / (l + 1);
  }
  return prefactor * sum;
}

}  // namespace cpjm
