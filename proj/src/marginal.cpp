#include "cpjm/marginal.hpp"

#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "cpjm/model.hpp"

namespace cpjm {

Eigen::MatrixXd make_design_z(const Eigen::VectorXd& s, double omega) {
  Eigen::MatrixXd z(s.size(), 3) ;
  for (int j = 0; j < s.size(); ++j) {
    const double delta = s(j) - omega;
    z(j, 0) = 1.0;
    z(j, 1) = delta <= 0.0 ? delta : 0.0;
    z(j, 2) = delta >= 0.0 ? delta : 0.0;
  }
  return z;
}

ExpectedZ expected_Z(const Eigen::VectorXd& s, const TruncNormParams& tn) {
  tn.validate();
  ExpectedZ out;
  const int n = static_cast<int>(s.size());
  out.ez.resize(n, 3);
  out.ewz.resize(n, 3);
  const double m1 = tn_moment(1, tn);
  for (int j = 0; j < n; ++j) {
    out.ez(j, 0) = 1.0;
    out.ez(j, 1) = partial_moment(0, 1, s(j), -kInf, 0.0, tn);
    out.ez(j, 2) = partial_moment(0, 1, s(j), 0.0, kInf, tn);
    out.ewz(j, 0) = m1;
    out.ewz(j, 1) = partial_moment(1, 1, s(j), -kInf, 0.0, tn);
    out.ewz(j, 2) = partial_moment(1, 1, s(j), 0.0, kInf, tn);
  }
  return out;
}

Eigen::VectorXd marginal_mean_y(const Eigen::MatrixXd& x,
                                const Eigen::VectorXd& s,
                                const Eigen::VectorXd& beta,
                                const PtmvnParams& ranef) {
  ranef.validate();
  if (ranef.dim() != 4) {
    throw std::invalid_argument("marginal_mean_y: expects 4-d random effects");
  }
  const ExpectedZ ez = expected_Z(s, ranef.omega_marginal());
  const double var_w = ranef.Sigma(0, 0);
  const Eigen::Vector3d sig_bw = ranef.Sigma.block<3, 1>(1, 0);
  const Eigen::Vector3d mu_b = ranef.mu.tail(3);
  const Eigen::Vector3d base = mu_b - (ranef.mu(0) / var_w) * sig_bw;
  Eigen::VectorXd mean = ez.ez * base + ez.ewz * (sig_bw / var_w);
  if (beta.size() > 0) mean += x * beta;
  return mean;
}

Eigen::MatrixXd marginal_cov_y_mc(const Eigen::MatrixXd& x,
                                  const Eigen::VectorXd& s,
                                  const PtmvnParams& ranef, double sigma_y,
                                  long draws, Rng& rng,
                                  bool include_mean_variation) {
  (void)x;  // fixed effects shift the mean only
  ranef.validate();
  if (draws < 1000) {
    throw std::invalid_argument("marginal_cov_y_mc: needs >= 1000 draws");
  }
  const int n = static_cast<int>(s.size());
  const double var_w = ranef.Sigma(0, 0);
  const Eigen::Vector3d sig_bw = ranef.Sigma.block<3, 1>(1, 0);
  const Eigen::Vector3d mu_b = ranef.mu.tail(3);
  const Eigen::Matrix3d cov_b_given_w =
      ranef.Sigma.block<3, 3>(1, 1) - sig_bw * sig_bw.transpose() / var_w;
  const TruncNormParams tn = ranef.omega_marginal();

  Eigen::MatrixXd mean_zsz = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd mean_v = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd sum_vv = Eigen::MatrixXd::Zero(n, n);
  for (long d = 0; d < draws; ++d) {
    const double omega = tn_sample(rng, tn);
    const Eigen::MatrixXd z = make_design_z(s, omega);
    const Eigen::Vector3d mu_cond = mu_b + sig_bw * ((omega - ranef.mu(0)) / var_w);
    const Eigen::VectorXd v = z * mu_cond;
    mean_zsz += z * cov_b_given_w * z.transpose();
    mean_v += v;
    sum_vv += v * v.transpose();
  }
  mean_zsz /= static_cast<double>(draws);
  mean_v /= static_cast<double>(draws);
  Eigen::MatrixXd cov = sigma_y * sigma_y * Eigen::MatrixXd::Identity(n, n) +
                        mean_zsz;
  if (include_mean_variation) {
    cov += sum_vv / static_cast<double>(draws) - mean_v * mean_v.transpose();
  }
  return cov;
}

double population_mean_changepoint(double mu_omega, double sigma_omega,
                                   const Eigen::VectorXd& gamma, double eta,
                                   double alpha,
                                   const Eigen::MatrixXd& w_cov) {
  if (!(sigma_omega > 0.0) || !(eta > 0.0) || !(alpha > 0.0)) {
    throw std::invalid_argument("population_mean_changepoint: bad parameters");
  }
  const int n_cov = std::max<int>(1, static_cast<int>(w_cov.rows()));
  const double lambda = -mu_omega / sigma_omega;

  double total = 0.0;
  for (int c = 0; c < n_cov; ++c) {
    Eigen::VectorXd w = w_cov.rows() > 0
                            ? Eigen::VectorXd(w_cov.row(c).transpose())
                            : Eigen::VectorXd();
    const double lin = (w.size() > 0 && gamma.size() > 0) ? w.dot(gamma) : 0.0;
    const double rate = eta * std::exp(lin);
    // E[omega | t* = t]; phi/Z ratios in log space so deep-tail truncation
    // masses stay finite. When the support (0, t) is narrow and far into one
    // tail the two ratios cancel catastrophically; there the density is an
    // exponential tilt to working precision, with closed-form mean.
    const auto cond_mean = [&](double t) {
      const double ups = (t - mu_omega) / sigma_omega;
      const double var = sigma_omega * sigma_omega;
      if (ups <= -15.0) {  // interval wholly below mu: density rises toward t
        const double slope = (mu_omega - t) / var;
        const double st = slope * t;
        return st > 1e-10 ? t - 1.0 / slope + t / std::expm1(st) : 0.5 * t;
      }
      if (lambda >= 15.0) {  // mu below zero: density falls from 0
        const double slope = -mu_omega / var;
        const double st = slope * t;
        return st > 1e-10 ? 1.0 / slope - t / std::expm1(st) : 0.5 * t;
      }
      const double log_z = log_normal_mass(lambda, ups);
      const double r_hi = std::exp(std_normal_logpdf(ups) - log_z);
      const double r_lo = std::exp(std_normal_logpdf(lambda) - log_z);
      return mu_omega - sigma_omega * (r_hi - r_lo);
    };
    // Event times beyond S(t) = exp(-40) contribute less than 1e-15.
    const double t_max = std::pow(40.0 / rate, 1.0 / alpha);
    // Split at the truncation layer around mu_omega so each piece is smooth
    // at the quadrature's scale.
    const auto clamp_knot = [&](double t) {
      return std::min(t_max, std::max(0.0, t));
    };
    const double k1 = clamp_knot(mu_omega - 8.0 * sigma_omega);
    const double k2 = clamp_knot(mu_omega + 8.0 * sigma_omega);

    double err_total = 0.0, val = 0.0;
    using quadrature = boost::math::quadrature::gauss_kronrod<double, 61>;
    const auto plain = [&](double t) {
      return cond_mean(t) *
             std::exp(weibull_ph_logpdf(t, w, gamma, eta, alpha));
    };
    double first_end = 0.0;
    if (alpha < 1.0) {
      // Integrable endpoint singularity t^{alpha-1}: substitute
      // t = c u^{1/alpha}, which cancels the power factor exactly.
      first_end = k1 > 0.0 ? k1 : (k2 > 0.0 ? k2 : t_max);
      const double scale = rate * std::pow(first_end, alpha);
      const auto g = [&](double u) {
        const double t = first_end * std::pow(u, 1.0 / alpha);
        return cond_mean(t) * scale * std::exp(-rate * std::pow(t, alpha));
      };
      double err = 0.0;
      val += quadrature::integrate(g, 0.0, 1.0, 15, 1e-9, &err);
      err_total += err;
    }
    const double knots[4] = {first_end, std::max(first_end, k1),
                             std::max(first_end, k2), t_max};
    for (int seg = 0; seg < 3; ++seg) {
      if (knots[seg + 1] > knots[seg]) {
        double err = 0.0;
        val += quadrature::integrate(plain, knots[seg], knots[seg + 1], 15,
                                     1e-9, &err);
        err_total += err;
      }
    }
    if (!(err_total <= 1e-6)) {
      throw std::runtime_error(
          "population_mean_changepoint: quadrature did not converge");
    }
    total += val;
  }
  return total / n_cov;
}

}  // namespace cpjm
