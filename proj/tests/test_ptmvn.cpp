#include <cmath>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "cpjm/ptmvn.hpp"

using namespace cpjm;

namespace {

PtmvnParams table_params(double lower, double upper) {
  PtmvnParams p;
  p.mu = fixtures::mu_r();
  p.Sigma = fixtures::sigma_r();
  p.lower = lower;
  p.upper = upper;
  return p;
}

PtmvnParams random_params(Rng& rng, int q, bool truncated) {
  Eigen::MatrixXd a(q, q);
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < q; ++j) a(i, j) = rng.normal();
  PtmvnParams p;
  p.Sigma = a * a.transpose() + 0.4 * Eigen::MatrixXd::Identity(q, q);
  p.mu = Eigen::VectorXd::Zero(q);
  for (int i = 0; i < q; ++i) p.mu(i) = rng.uniform(-1.5, 1.5);
  if (truncated) {
    const double so = p.sigma_omega();
    p.lower = p.mu(0) + so * rng.uniform(-3.0, 0.5);
    p.upper = p.lower + so * rng.uniform(0.5, 4.0);
  }
  return p;
}

// Plain MVN draw via Cholesky (test-only path, independent of ptmvn_sample).
Eigen::VectorXd mvn_draw(Rng& rng, const Eigen::VectorXd& mu,
                         const Eigen::MatrixXd& chol_l) {
  Eigen::VectorXd z(mu.size());
  for (int i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return mu + chol_l * z;
}

double mvn_logpdf_ref(const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                      const Eigen::MatrixXd& sigma) {
  const int q = static_cast<int>(x.size());
  const Eigen::MatrixXd inv = sigma.inverse();
  const double quad = (x - mu).dot(inv * (x - mu));
  return -0.5 * (q * std::log(2.0 * M_PI) + std::log(sigma.determinant()) +
                 quad);
}

}  // namespace

TEST_SUITE_BEGIN("ptmvn");

TEST_CASE("logpdf reduces to the normal density without truncation") {
  PtmvnParams p;
  p.mu = Eigen::VectorXd::Zero(1);
  p.Sigma = Eigen::MatrixXd::Identity(1, 1);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(1);
  CHECK(ptmvn_logpdf(r, p) ==
        doctest::Approx(-0.9189385332046727).epsilon(1e-14));
}

TEST_CASE("logpdf excludes the boundary") {
  Rng rng(3);
  PtmvnParams p = random_params(rng, 2, true);
  Eigen::VectorXd r(2);
  r << p.lower, 0.0;
  CHECK(ptmvn_logpdf(r, p) == -kInf);
  r(0) = p.upper;
  CHECK(ptmvn_logpdf(r, p) == -kInf);
}

TEST_CASE("logpdf rejects non positive definite Sigma") {
  PtmvnParams p;
  p.mu = Eigen::VectorXd::Zero(2);
  p.Sigma = Eigen::MatrixXd::Constant(2, 2, 1.0);
  p.Sigma(0, 1) = p.Sigma(1, 0) = 2.0;  // indefinite
  CHECK_THROWS_AS(ptmvn_logpdf(Eigen::VectorXd::Zero(2), p),
                  std::invalid_argument);
}

TEST_CASE("logpdf normalizer against a Monte Carlo oracle") {
  const PtmvnParams p = table_params(0.0, 1.0);
  // The normalizer is P(lower < omega < upper) under the untruncated
  // marginal; estimate it by direct simulation of omega alone.
  Rng rng(11);
  const double sigma_w = p.sigma_omega();
  long hits = 0;
  const long n = 2000000;
  for (long i = 0; i < n; ++i) {
    const double w = p.mu(0) + sigma_w * rng.normal();
    if (w > p.lower && w < p.upper) ++hits;
  }
  const double zhat = static_cast<double>(hits) / n;
  const double se = std::sqrt(zhat * (1.0 - zhat) / n);
  const double oracle_lo = mvn_logpdf_ref(p.mu, p.mu, p.Sigma) -
                           std::log(zhat + 3 * se);
  const double oracle_hi = mvn_logpdf_ref(p.mu, p.mu, p.Sigma) -
                           std::log(zhat - 3 * se);
  const double got = ptmvn_logpdf(p.mu, p);
  CHECK(got >= oracle_lo);
  CHECK(got <= oracle_hi);
}

TEST_CASE("chain rule identity logpdf = tn + conditional normal") {
  Rng rng(17);
  for (int rep = 0; rep < 100; ++rep) {
    const PtmvnParams p = random_params(rng, 1 + rep % 4 + 1, true);
    const int q = p.dim();
    Eigen::VectorXd r(q);
    r(0) = rng.uniform(p.lower, p.upper);
    for (int i = 1; i < q; ++i) r(i) = rng.normal();
    const ConditionalNormal cond = cond_b_given_omega(r(0), p);
    const double lhs = ptmvn_logpdf(r, p);
    const double rhs = tn_logpdf(r(0), p.omega_marginal()) +
                       mvn_logpdf_ref(r.tail(q - 1), cond.mean, cond.cov);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("marginalizing b recovers the truncated normal (q = 2)") {
  Rng rng(23);
  for (int rep = 0; rep < 10; ++rep) {
    const PtmvnParams p = random_params(rng, 2, true);
    for (double frac : {0.25, 0.7}) {
      const double w = p.lower + frac * (p.upper - p.lower);
      const auto joint = [&](double b) {
        Eigen::VectorXd r(2);
        r << w, b;
        return std::exp(ptmvn_logpdf(r, p));
      };
      const double marginal = oracles::quad(joint, -kInf, kInf, 1e-10);
      const double expected = std::exp(tn_logpdf(w, p.omega_marginal()));
      CHECK(marginal == doctest::Approx(expected).epsilon(1e-8));
    }
  }
}

TEST_CASE("cond_b_given_omega structure") {
  Rng rng(29);
  PtmvnParams p = random_params(rng, 4, true);
  SUBCASE("independent blocks decouple") {
    p.Sigma.block(0, 1, 1, 3).setZero();
    p.Sigma.block(1, 0, 3, 1).setZero();
    const double w = rng.uniform(p.lower, p.upper);
    const auto c = cond_b_given_omega(w, p);
    CHECK((c.mean - p.mu.tail(3)).norm() < 1e-14);
    CHECK((c.cov - p.Sigma.block(1, 1, 3, 3)).norm() < 1e-14);
  }
  SUBCASE("centered omega leaves the mean unchanged") {
    PtmvnParams pc = table_params(0.0, 2.0);
    const auto c = cond_b_given_omega(pc.mu(0), pc);
    CHECK((c.mean - pc.mu.tail(3)).norm() < 1e-14);
  }
  SUBCASE("omega outside the interval throws") {
    CHECK_THROWS_AS(cond_b_given_omega(p.lower - 1.0, p),
                    std::invalid_argument);
  }
}

TEST_CASE("cond_b_given_omega against a rejection oracle") {
  const PtmvnParams p = table_params(0.0, kInf);
  const double w0 = 1.2, half_band = 0.001;
  Rng rng(31);
  const Eigen::MatrixXd chol_l =
      Eigen::LLT<Eigen::MatrixXd>(p.Sigma).matrixL();
  std::vector<Eigen::Vector3d> kept;
  for (long i = 0; i < 4000000; ++i) {
    const Eigen::VectorXd r = mvn_draw(rng, p.mu, chol_l);
    if (std::abs(r(0) - w0) < half_band) kept.push_back(r.tail(3));
  }
  REQUIRE(kept.size() > 500);
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& b : kept) mean += b;
  mean /= static_cast<double>(kept.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& b : kept) cov += (b - mean) * (b - mean).transpose();
  cov /= static_cast<double>(kept.size() - 1);
  const auto c = cond_b_given_omega(w0, p);
  const double m = static_cast<double>(kept.size());
  for (int i = 0; i < 3; ++i) {
    const double se = std::sqrt(cov(i, i) / m);
    CHECK(std::abs(c.mean(i) - mean(i)) < 4.0 * se);
    for (int j = 0; j < 3; ++j) {
      const double se_cov =
          std::sqrt((cov(i, i) * cov(j, j) + cov(i, j) * cov(i, j)) / m);
      CHECK(std::abs(c.cov(i, j) - cov(i, j)) < 4.0 * se_cov);
    }
  }
}

TEST_CASE("cond_omega_given_b structure") {
  Rng rng(37);
  PtmvnParams p = random_params(rng, 4, true);
  SUBCASE("zero cross covariance") {
    p.Sigma.block(0, 1, 1, 3).setZero();
    p.Sigma.block(1, 0, 3, 1).setZero();
    const auto tn = cond_omega_given_b(Eigen::Vector3d(1.0, -2.0, 0.3), p);
    CHECK(tn.mu == doctest::Approx(p.mu(0)).epsilon(1e-14));
    CHECK(tn.sigma == doctest::Approx(p.sigma_omega()).epsilon(1e-14));
    CHECK(tn.a == p.lower);
    CHECK(tn.b == p.upper);
  }
  SUBCASE("b at its mean") {
    const auto tn = cond_omega_given_b(p.mu.tail(3), p);
    CHECK(tn.mu == doctest::Approx(p.mu(0)).epsilon(1e-14));
  }
}

TEST_CASE("cond_omega_given_b against a constrained rejection oracle") {
  const PtmvnParams p = table_params(0.0, 1.5);
  const Eigen::Vector3d b0(-0.3, -0.1, 0.8);
  const double ball = 0.06;
  Rng rng(41);
  const Eigen::MatrixXd chol_l =
      Eigen::LLT<Eigen::MatrixXd>(p.Sigma).matrixL();
  std::vector<double> omegas;
  for (long i = 0; i < 6000000; ++i) {
    const Eigen::VectorXd r = mvn_draw(rng, p.mu, chol_l);
    if (!(r(0) > p.lower && r(0) < p.upper)) continue;
    if ((r.tail(3) - b0).norm() < ball) omegas.push_back(r(0));
  }
  REQUIRE(omegas.size() > 1000);
  double mean = 0.0;
  for (double w : omegas) mean += w;
  mean /= static_cast<double>(omegas.size());
  double var = 0.0;
  for (double w : omegas) var += (w - mean) * (w - mean);
  var /= static_cast<double>(omegas.size() - 1);
  const auto tn = cond_omega_given_b(b0, p);
  const double expected_mean = tn_moment(1, tn);
  const double se = std::sqrt(var / static_cast<double>(omegas.size()));
  // 4 SEs plus a first-order allowance for the finite conditioning ball.
  CHECK(std::abs(mean - expected_mean) < 4.0 * se + 0.25 * ball * ball);
}

TEST_CASE("ptmvn_sample support and closed-form mean") {
  Rng rng(43);
  SUBCASE("untruncated draws recover mu") {
    PtmvnParams p = table_params(-kInf, kInf);
    Eigen::Vector4d sum = Eigen::Vector4d::Zero();
    const long n = 1000000;
    for (long i = 0; i < n; ++i) sum += ptmvn_sample(rng, p);
    const Eigen::Vector4d mean = sum / static_cast<double>(n);
    for (int i = 0; i < 4; ++i) {
      const double se = std::sqrt(p.Sigma(i, i) / static_cast<double>(n));
      CHECK(std::abs(mean(i) - p.mu(i)) < 4.0 * se);
    }
  }
  SUBCASE("support always respected") {
    PtmvnParams p = table_params(0.0, 1.0);
    for (int i = 0; i < 20000; ++i) {
      const Eigen::VectorXd r = ptmvn_sample(rng, p);
      CHECK(r(0) > 0.0);
      CHECK(r(0) < 1.0);
    }
  }
  SUBCASE("empirical mean matches ptmvn_mean") {
    PtmvnParams p = table_params(0.0, 1.0);
    const Eigen::Vector4d closed = ptmvn_mean(p);
    Eigen::Vector4d sum = Eigen::Vector4d::Zero();
    Eigen::Vector4d sumsq = Eigen::Vector4d::Zero();
    const long n = 1000000;
    for (long i = 0; i < n; ++i) {
      const Eigen::VectorXd r = ptmvn_sample(rng, p);
      sum += r;
      sumsq += r.cwiseProduct(r);
    }
    const Eigen::Vector4d mean = sum / static_cast<double>(n);
    for (int i = 0; i < 4; ++i) {
      const double var =
          sumsq(i) / n - mean(i) * mean(i);
      const double se = std::sqrt(var / static_cast<double>(n));
      CHECK(std::abs(mean(i) - closed(i)) < 4.0 * se);
    }
  }
}

TEST_CASE("ptmvn_mean closed forms") {
  SUBCASE("no truncation returns mu") {
    PtmvnParams p = table_params(-kInf, kInf);
    CHECK((ptmvn_mean(p) - p.mu).norm() < 1e-14);
  }
  SUBCASE("scalar half normal") {
    PtmvnParams p;
    p.mu = Eigen::VectorXd::Zero(1);
    p.Sigma = Eigen::MatrixXd::Identity(1, 1);
    p.lower = 0.0;
    CHECK(ptmvn_mean(p)(0) ==
          doctest::Approx(std::sqrt(2.0 / M_PI)).epsilon(1e-12));
    CHECK(ptmvn_mean(p)(0) ==
          doctest::Approx(tn_moment(1, p.omega_marginal())).epsilon(1e-12));
  }
}

TEST_CASE("mgf basics and Monte Carlo check") {
  PtmvnParams p = table_params(0.0, 1.0);
  SUBCASE("value one at the origin") {
    CHECK(ptmvn_mgf(Eigen::Vector4d::Zero(), p) == doctest::Approx(1.0));
  }
  SUBCASE("untruncated case is the normal mgf") {
    PtmvnParams pu = table_params(-kInf, kInf);
    Eigen::Vector4d t(0.3, -0.2, 0.1, 0.05);
    const double expected =
        std::exp(t.dot(pu.mu) + 0.5 * t.dot(pu.Sigma * t));
    CHECK(ptmvn_mgf(t, pu) == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("matches E[exp(0.1 omega)] by simulation") {
    Rng rng(47);
    Eigen::Vector4d t(0.1, 0.0, 0.0, 0.0);
    const auto s = oracles::mc_summary(1000000, [&] {
      return std::exp(0.1 * ptmvn_sample(rng, p)(0));
    });
    CHECK(std::abs(ptmvn_mgf(t, p) - s.mean) < 4.0 * s.se());
  }
  SUBCASE("overflow reports the log mgf") {
    Eigen::Vector4d t(0.0, 0.0, 0.0, 50.0);
    CHECK_THROWS_AS(ptmvn_mgf(t, p), std::overflow_error);
    CHECK(std::isfinite(ptmvn_log_mgf(t, p)));
  }
}

TEST_CASE("mgf finite differences reproduce the mean") {
  Rng rng(53);
  for (int rep = 0; rep < 20; ++rep) {
    const PtmvnParams p = random_params(rng, 4, true);
    const Eigen::VectorXd mean = ptmvn_mean(p);
    const double h = 1e-5;
    for (int i = 0; i < 4; ++i) {
      Eigen::VectorXd t = Eigen::VectorXd::Zero(4);
      t(i) = h;
      const double up = ptmvn_log_mgf(t, p);
      t(i) = -h;
      const double dn = ptmvn_log_mgf(t, p);
      // d/dt log M at 0 equals the mean as well since M(0) = 1.
      const double fd = (std::exp(up) - std::exp(dn)) / (2.0 * h);
      CHECK(std::abs(fd - mean(i)) <=
            1e-5 * std::max(1.0, std::abs(mean(i))));
    }
  }
}

TEST_CASE("partial_moment basics") {
  const TruncNormParams tn{0.9, 0.15, 0.0, 1.2};
  CHECK(partial_moment(0, 0, 0.4, -kInf, kInf, tn) == doctest::Approx(1.0));
  CHECK(partial_moment(1, 0, 0.4, -kInf, kInf, tn) ==
        doctest::Approx(tn_moment(1, tn)).epsilon(1e-12));
  // Interval that misses the support entirely.
  CHECK(partial_moment(0, 1, 2.0, 0.0, kInf, tn) ==
        doctest::Approx((2.0 - tn_moment(1, tn))).epsilon(1e-12));
  CHECK(partial_moment(0, 1, -1.0, 0.0, kInf, tn) == 0.0);
}

TEST_CASE("partial_moment against direct simulation") {
  const TruncNormParams tn{0.9, 0.15, 0.0, 1.2};
  Rng rng(59);
  // Plain rejection draws from the truncated normal, independent of
  // tn_sample's tail logic.
  const auto draw = [&] {
    for (;;) {
      const double w = tn.mu + tn.sigma * rng.normal();
      if (w > tn.a && w < tn.b) return w;
    }
  };
  const double s = 0.5;
  const auto summary = oracles::mc_summary(10000000, [&] {
    const double w = draw();
    return (s - w <= 0.0) ? (s - w) : 0.0;  // Delta 1{Delta <= 0}
  });
  const double expected = partial_moment(0, 1, s, -kInf, 0.0, tn);
  CHECK(std::abs(expected - summary.mean) < 4.0 * summary.se());
}

TEST_CASE("indicator split adds to the full moment") {
  Rng rng(61);
  for (int rep = 0; rep < 20; ++rep) {
    TruncNormParams tn;
    tn.mu = rng.uniform(-1, 1.5);
    tn.sigma = rng.uniform(0.05, 1.0);
    tn.a = tn.mu - tn.sigma * rng.uniform(0.5, 4.0);
    tn.b = tn.mu + tn.sigma * rng.uniform(0.5, 4.0);
    const double s = rng.uniform(tn.a, tn.b);
    for (int k = 0; k <= 3; ++k) {
      const double below = partial_moment(0, k, s, -kInf, 0.0, tn);
      const double above = partial_moment(0, k, s, 0.0, kInf, tn);
      // E[Delta^k] by direct binomial expansion over raw moments.
      double total = 0.0, binom = 1.0;
      for (int l = 0; l <= k; ++l) {
        total += binom * ((l % 2 == 0) ? 1.0 : -1.0) *
                 std::pow(s, k - l) * tn_moment(l, tn);
        binom = binom * (k - l) / (l + 1);
      }
      CHECK(below + above ==
            doctest::Approx(total).epsilon(1e-9));
    }
  }
}

TEST_SUITE_END();
