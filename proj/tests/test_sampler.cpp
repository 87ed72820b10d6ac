#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "cpjm/sampler.hpp"
#include "cpjm/truncnorm.hpp"

using namespace cpjm;

namespace {

LogDensity gaussian_target(const Eigen::VectorXd& var) {
  return [var](const Eigen::VectorXd& q, Eigen::VectorXd* g) {
    double lp = 0.0;
    if (g != nullptr) g->resize(q.size());
    for (int i = 0; i < q.size(); ++i) {
      lp += -0.5 * q(i) * q(i) / var(i);
      if (g != nullptr) (*g)(i) = -q(i) / var(i);
    }
    return lp;
  };
}

PosteriorDraws synthetic_chains(int chains, int len,
                                const std::function<double(int, Rng&)>& gen) {
  PosteriorDraws d;
  d.names = {"x"};
  for (int c = 0; c < chains; ++c) {
    Rng rng(100 + c);
    Eigen::MatrixXd m(len, 1);
    for (int i = 0; i < len; ++i) m(i, 0) = gen(c, rng);
    d.chains.push_back(m);
  }
  d.diagnostics.resize(chains);
  return d;
}

}  // namespace

TEST_SUITE_BEGIN("sampler");

TEST_CASE("standard normal target in 10 dimensions") {
  const int dim = 10;
  SamplerConfig cfg;
  cfg.chains = 4;
  cfg.warmup = 500;
  cfg.samples = 1000;
  cfg.seed = 99;
  const auto target = gaussian_target(Eigen::VectorXd::Ones(dim));
  const auto draws =
      sample(target, Eigen::VectorXd::Zero(dim), {}, nullptr, cfg);
  REQUIRE(draws.num_chains() == 4);
  REQUIRE(draws.num_samples() == 1000);
  for (int i = 0; i < dim; ++i) {
    const Eigen::VectorXd x = draws.pooled("x" + std::to_string(i));
    const double mean = x.mean();
    const double var = (x.array() - mean).square().sum() / (x.size() - 1);
    CHECK(std::abs(mean) < 0.05);
    CHECK(std::abs(var - 1.0) < 0.1);
  }
  int total_div = 0;
  for (const auto& d : draws.diagnostics) total_div += d.divergences;
  CHECK(total_div == 0);
}

TEST_CASE("ill-conditioned gaussian (condition number 100)") {
  const int dim = 8;
  Eigen::VectorXd var(dim);
  for (int i = 0; i < dim; ++i) {
    var(i) = 0.01 * std::pow(100.0, static_cast<double>(i) / (dim - 1));
  }
  SamplerConfig cfg;
  cfg.chains = 4;
  cfg.warmup = 1000;
  cfg.samples = 1000;
  cfg.seed = 7;
  const auto draws =
      sample(gaussian_target(var), Eigen::VectorXd::Zero(dim), {}, nullptr, cfg);
  for (int i = 0; i < dim; ++i) {
    const Eigen::VectorXd x = draws.pooled("x" + std::to_string(i));
    const double mean = x.mean();
    const double v = (x.array() - mean).square().sum() / (x.size() - 1);
    CHECK(std::abs(mean) < 0.05);
    CHECK(std::abs(v - var(i)) < 0.1);
  }
}

TEST_CASE("same seed gives bit-identical draws") {
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.warmup = 200;
  cfg.samples = 100;
  cfg.seed = 1234;
  const auto t = gaussian_target(Eigen::VectorXd::Ones(3));
  const auto a = sample(t, Eigen::VectorXd::Zero(3), {}, nullptr, cfg);
  const auto b = sample(t, Eigen::VectorXd::Zero(3), {}, nullptr, cfg);
  for (int c = 0; c < 2; ++c) {
    CHECK((a.chains[c] - b.chains[c]).cwiseAbs().maxCoeff() == 0.0);
  }
  SamplerConfig cfg2 = cfg;
  cfg2.seed = 1235;
  const auto c2 = sample(t, Eigen::VectorXd::Zero(3), {}, nullptr, cfg2);
  CHECK((a.chains[0] - c2.chains[0]).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("detailed balance smoke test on a 2-d gaussian") {
  Eigen::VectorXd var(2);
  var << 1.0, 0.25;
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.warmup = 500;
  cfg.samples = 2000;
  cfg.seed = 31;
  const auto draws =
      sample(gaussian_target(var), Eigen::VectorXd::Zero(2), {}, nullptr, cfg);
  const Eigen::VectorXd x = draws.pooled("x0");
  std::vector<double> xs(x.data(), x.data() + x.size());
  const double d =
      oracles::ks_statistic(xs, [](double v) { return std_normal_cdf(v); });
  // 1% critical value with an effective-size discount for autocorrelation.
  CHECK(d < 1.6276 / std::sqrt(static_cast<double>(xs.size()) / 4.0));
}

TEST_CASE("static trajectory fallback still samples correctly") {
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.warmup = 500;
  cfg.samples = 2000;
  cfg.seed = 11;
  cfg.nuts = false;
  cfg.static_steps = 16;
  const auto draws = sample(gaussian_target(Eigen::VectorXd::Ones(2)),
                            Eigen::VectorXd::Zero(2), {}, nullptr, cfg);
  const Eigen::VectorXd x = draws.pooled("x1");
  CHECK(std::abs(x.mean()) < 0.1);
  const double var = (x.array() - x.mean()).square().sum() / (x.size() - 1);
  CHECK(std::abs(var - 1.0) < 0.15);
}

TEST_CASE("non-finite start is rejected") {
  const auto t = [](const Eigen::VectorXd& q, Eigen::VectorXd* g) {
    if (g != nullptr) g->setZero(q.size());
    return -kInf;
  };
  SamplerConfig cfg;
  cfg.chains = 1;
  cfg.warmup = 100;
  cfg.samples = 10;
  CHECK_THROWS_AS(sample(t, Eigen::VectorXd::Zero(2), {}, nullptr, cfg),
                  SamplerError);
}

TEST_CASE("rhat conventions and oracles") {
  SUBCASE("constant equal chains return 1") {
    const auto d = synthetic_chains(4, 200, [](int, Rng&) { return 2.5; });
    CHECK(rhat(d, "x") == 1.0);
  }
  SUBCASE("iid standard normal chains sit near 1") {
    const auto d =
        synthetic_chains(4, 2000, [](int, Rng& r) { return r.normal(); });
    const double v = rhat(d, "x");
    CHECK(v > 0.99);
    CHECK(v < 1.01);
  }
  SUBCASE("shifted chains are flagged") {
    const auto d = synthetic_chains(4, 500, [](int c, Rng& r) {
      return r.normal() + (c % 2 == 0 ? 3.0 : -3.0);
    });
    CHECK(rhat(d, "x") > 1.5);
  }
  SUBCASE("needs enough chains and draws") {
    const auto d =
        synthetic_chains(1, 500, [](int, Rng& r) { return r.normal(); });
    CHECK_THROWS_AS(rhat(d, "x"), std::invalid_argument);
  }
}

TEST_CASE("ess oracles") {
  SUBCASE("iid draws recover the sample size") {
    const auto d =
        synthetic_chains(4, 1000, [](int, Rng& r) { return r.normal(); });
    const double e = ess(d, "x");
    CHECK(e > 0.8 * 4000);
    CHECK(e <= 1.2 * 4000);
  }
  SUBCASE("ar(1) with phi = 0.9") {
    const double phi = 0.9;
    std::vector<double> state(4, 0.0);
    const auto d = synthetic_chains(4, 5000, [&](int c, Rng& r) {
      state[c] = phi * state[c] + std::sqrt(1 - phi * phi) * r.normal();
      return state[c];
    });
    const double e = ess(d, "x");
    const double expected = 20000.0 * (1 - phi) / (1 + phi);
    CHECK(e > 0.7 * expected);
    CHECK(e < 1.3 * expected);
  }
  SUBCASE("constant chain is degenerate") {
    const auto d = synthetic_chains(2, 200, [](int, Rng&) { return 1.0; });
    CHECK(ess(d, "x") == 0.0);
  }
}

TEST_SUITE_END();
