#include <cmath>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "doctest.h"
#include "oracles.hpp"
#include "cpjm/truncnorm.hpp"

using namespace cpjm;

TEST_SUITE_BEGIN("truncnorm");

TEST_CASE("std_normal_cdf basics") {
  CHECK(std_normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std_normal_cdf(kInf) == 1.0);
  CHECK(std_normal_cdf(-kInf) == 0.0);
  // 97.5% quantile; expected value frozen from the quadrature oracle.
  CHECK(std::abs(std_normal_cdf(1.959963985) - 0.975) < 1e-9);
  CHECK_THROWS_AS(std_normal_cdf(std::nan("")), std::invalid_argument);
}

TEST_CASE("std_normal_cdf accuracy and monotonicity") {
  boost::math::normal_distribution<double> ref;
  double prev = 0.0;
  for (int i = -80; i <= 80; ++i) {
    const double x = 0.1 * i;
    const double c = std_normal_cdf(x);
    CHECK(std::abs(c - boost::math::cdf(ref, x)) < 1e-15);
    CHECK(c >= prev);
    prev = c;
  }
  // Spot check against direct quadrature of the density.
  const double q = oracles::quad(oracles::phi, -kInf, 1.3);
  CHECK(std::abs(std_normal_cdf(1.3) - q) < 1e-12);
}

TEST_CASE("log tail cdf deep into the tail") {
  // Reference values from 60-digit arithmetic.
  const std::pair<double, double> ref[] = {
      {5.0, -15.06499839398872573608},   {10.0, -53.23128515051247057835},
      {20.0, -203.9171553710972639368},  {30.0, -454.3212439563431971074},
      {45.0, -1017.226094241952370733},  {100.0, -5005.524208694205088626}};
  for (const auto& [x, lv] : ref) {
    CHECK(std_normal_logccdf(x) == doctest::Approx(lv).epsilon(1e-13));
    CHECK(std_normal_logcdf(-x) == doctest::Approx(lv).epsilon(1e-13));
  }
  CHECK(std_normal_logcdf(0.0) == doctest::Approx(std::log(0.5)));
}

TEST_CASE("normal_mass stability") {
  // Straddling interval: no cancellation.
  CHECK(normal_mass(-1e-9, 1e-9) ==
        doctest::Approx(2e-9 * oracles::phi(0.0)).epsilon(1e-12));
  // Same-side tail interval.
  const double m = normal_mass(6.0, 7.0);
  const double q = oracles::quad(oracles::phi, 6.0, 7.0);
  CHECK(m == doctest::Approx(q).epsilon(1e-12));
  // Log version agrees where mass is representable.
  CHECK(log_normal_mass(6.0, 7.0) == doctest::Approx(std::log(m)).epsilon(1e-12));
  // And stays finite when the mass underflows.
  CHECK(std::isfinite(log_normal_mass(40.0, 41.0)));
  CHECK(log_normal_mass(40.0, 41.0) < -700.0);
}

TEST_CASE("tn_logpdf examples") {
  CHECK(tn_logpdf(0.0, {0, 1, -kInf, kInf}) ==
        doctest::Approx(-0.9189385332046727).epsilon(1e-14));
  // Half-normal: normalizer Phi(inf) - Phi(0) = 1/2.
  CHECK(tn_logpdf(0.5, {0, 1, 0, kInf}) ==
        doctest::Approx(-0.9189385332046727 - 0.125 + std::log(2.0))
            .epsilon(1e-14));
  // Quadrature-normalized density oracle.
  const TruncNormParams p{0.9, 0.15, 0.0, 1.5};
  const auto dens = [&](double x) {
    return oracles::phi((x - p.mu) / p.sigma) / p.sigma;
  };
  const double z = oracles::quad(dens, p.a, p.b);
  CHECK(tn_logpdf(1.2, p) ==
        doctest::Approx(std::log(dens(1.2) / z)).epsilon(1e-10));
  // Outside and on the boundary.
  CHECK(tn_logpdf(0.0, p) == -kInf);
  CHECK(tn_logpdf(-0.5, p) == -kInf);
  CHECK(tn_logpdf(1.5, p) == -kInf);
}

TEST_CASE("tn_logpdf degenerate region throws") {
  CHECK_THROWS_AS(tn_logpdf(40.2, {0, 1, 40, 41}), DegenerateTruncation);
  CHECK_THROWS_AS(tn_moment(1, {0, 1, 40, 41}), DegenerateTruncation);
  CHECK_THROWS_AS(tn_logpdf(0.0, {0, -1, 0, 1}), std::invalid_argument);
  CHECK_THROWS_AS(tn_logpdf(0.0, {0, 1, 2, 1}), std::invalid_argument);
}

TEST_CASE("tn_logpdf integrates to one including tail truncations") {
  Rng rng(71);
  for (int rep = 0; rep < 20; ++rep) {
    TruncNormParams p;
    p.mu = rng.uniform(-2, 2);
    p.sigma = rng.uniform(0.05, 2.0);
    if (rep < 14) {
      p.a = p.mu - p.sigma * rng.uniform(0.2, 4.0);
      p.b = p.mu + p.sigma * rng.uniform(0.2, 4.0);
    } else {
      p.a = p.mu + 6.0 * p.sigma;  // far-tail truncation
      p.b = (rep % 2 == 0) ? kInf : p.mu + 8.0 * p.sigma;
    }
    const auto dens = [&](double x) { return std::exp(tn_logpdf(x, p)); };
    const double total = oracles::quad(dens, p.a, p.b, 1e-10);
    CHECK(std::abs(total - 1.0) < 1e-8);
  }
}

TEST_CASE("tn_moment base cases and closed forms") {
  CHECK(tn_moment(0, {0.3, 2.0, -1.0, 5.0}) == 1.0);
  const double root_2_over_pi = std::sqrt(2.0 / M_PI);
  CHECK(tn_moment(1, {0, 1, 0, kInf}) ==
        doctest::Approx(root_2_over_pi).epsilon(1e-14));
  CHECK(tn_moment(1, {0, 1, 0, kInf}) ==
        doctest::Approx(oracles::tn_moment_quad(1, 0, 1, 0, 60)).epsilon(1e-10));
  CHECK_THROWS_AS(tn_moment(-1, {0, 1, 0, 1}), std::invalid_argument);
}

TEST_CASE("tn_moment matches quadrature") {
  const TruncNormParams p{0.9, 0.15, 0.0, 1.5};
  const double q4 = oracles::tn_moment_quad(4, p.mu, p.sigma, p.a, p.b);
  CHECK(std::abs(tn_moment(4, p) / q4 - 1.0) < 1e-8);
}

TEST_CASE("untruncated moments reduce to normal moments") {
  Rng rng(9);
  for (int rep = 0; rep < 50; ++rep) {
    // mu kept away from 0 so the odd moment has a well-defined relative error
    const double mu = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.2, 3.0);
    const double sigma = rng.uniform(0.1, 3.0);
    const TruncNormParams p{mu, sigma, -kInf, kInf};
    const double m2 = mu * mu + sigma * sigma;
    const double m3 = mu * mu * mu + 3.0 * mu * sigma * sigma;
    CHECK(std::abs(tn_moment(2, p) / m2 - 1.0) < 1e-10);
    CHECK(std::abs(tn_moment(3, p) / m3 - 1.0) < 1e-10);
  }
}

TEST_CASE("tn_sample support and moments") {
  Rng rng(1234);
  {
    const auto s = oracles::mc_summary(
        1000000, [&] { return tn_sample(rng, {0, 1, -kInf, kInf}); });
    CHECK(std::abs(s.mean) < 4e-3);
  }
  {
    const TruncNormParams p{0, 1, 0, kInf};
    const auto s = oracles::mc_summary(1000000, [&] { return tn_sample(rng, p); });
    CHECK(std::abs(s.mean - tn_mean(p)) < 4.0 * s.se());
  }
  {
    const TruncNormParams p{0.9, 0.15, 0.0, 1.1};
    for (int i = 0; i < 100000; ++i) {
      const double x = tn_sample(rng, p);
      CHECK(x > 0.0);
      CHECK(x < 1.1);
    }
  }
}

TEST_CASE("tn_sample far-tail regions stay exact and fast") {
  Rng rng(55);
  const TruncNormParams p{0, 1, 8.0, 8.5};
  const auto s = oracles::mc_summary(200000, [&] { return tn_sample(rng, p); });
  const double m1 = oracles::tn_moment_quad(1, 0, 1, 8.0, 8.5);
  CHECK(std::abs(s.mean - m1) < 4.0 * s.se());
}

TEST_CASE("tn_sample KS against the cdf") {
  Rng rng(2024);
  for (int rep = 0; rep < 10; ++rep) {
    TruncNormParams p;
    p.mu = rng.uniform(-1, 1);
    p.sigma = rng.uniform(0.1, 2.0);
    p.a = p.mu + p.sigma * rng.uniform(-3.0, 1.5);
    p.b = p.a + p.sigma * rng.uniform(0.3, 5.0);
    std::vector<double> xs(100000);
    for (auto& x : xs) x = tn_sample(rng, p);
    const double d =
        oracles::ks_statistic(xs, [&](double x) { return tn_cdf(x, p); });
    const double crit = 1.6276 / std::sqrt(static_cast<double>(xs.size()));
    CHECK(d < crit);
  }
}

TEST_SUITE_END();
