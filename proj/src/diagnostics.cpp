#include <cmath>
#include <vector>

#include "cpjm/sampler.hpp"
#include "cpjm/truncnorm.hpp"

namespace cpjm {

namespace {

double sample_variance(const Eigen::VectorXd& x) {
  const double m = x.mean();
  return (x.array() - m).square().sum() / (x.size() - 1);
}

// Autocovariance at lags 0..max_lag with 1/N normalization.
std::vector<double> autocovariance(const Eigen::VectorXd& x, int max_lag) {
  const int n = static_cast<int>(x.size());
  const double m = x.mean();
  std::vector<double> acov(max_lag + 1, 0.0);
  for (int t = 0; t <= max_lag; ++t) {
    double s = 0.0;
    for (int i = 0; i + t < n; ++i) s += (x(i) - m) * (x(i + t) - m);
    acov[t] = s / n;
  }
  return acov;
}

}  // namespace

double rhat(const PosteriorDraws& draws, const std::string& name) {
  const int m_chains = draws.num_chains();
  const int len = draws.num_samples();
  if (m_chains < 2 || len < 50) {
    throw std::invalid_argument(
        "rhat: needs at least 2 chains with 50 draws each");
  }
  const int half = len / 2;
  std::vector<Eigen::VectorXd> splits;
  for (int c = 0; c < m_chains; ++c) {
    const Eigen::VectorXd col = draws.chain_column(c, name);
    splits.push_back(col.head(half));
    splits.push_back(col.segment(half, half));
  }
  const int m = static_cast<int>(splits.size());
  Eigen::VectorXd means(m), vars(m);
  for (int j = 0; j < m; ++j) {
    means(j) = splits[j].mean();
    vars(j) = sample_variance(splits[j]);
  }
  const double w = vars.mean();
  const double b_over_n = sample_variance(means);
  if (w <= 0.0) return 1.0;  // all-constant chains
  const double var_plus = (half - 1.0) / half * w + b_over_n;
  return std::sqrt(var_plus / w);
}

double ess(const PosteriorDraws& draws, const std::string& name) {
  const int m_chains = draws.num_chains();
  const int len = draws.num_samples();
  if (static_cast<long>(m_chains) * len < 100) {
    throw std::invalid_argument("ess: needs at least 100 total draws");
  }
  const int max_lag = len - 1;
  std::vector<std::vector<double>> acovs;
  Eigen::VectorXd means(m_chains), vars(m_chains);
  for (int c = 0; c < m_chains; ++c) {
    const Eigen::VectorXd col = draws.chain_column(c, name);
    means(c) = col.mean();
    vars(c) = sample_variance(col);
    acovs.push_back(autocovariance(col, max_lag));
  }
  const double w = vars.mean();
  const double b_over_n = m_chains > 1 ? sample_variance(means) : 0.0;
  const double var_plus = (len - 1.0) / len * w + b_over_n;
  if (!(var_plus > 0.0)) return 0.0;  // degenerate constant chains

  // rho_t from the mean raw autocovariance across chains.
  const auto rho = [&](int t) {
    double a = 0.0;
    for (const auto& ac : acovs) a += ac[t];
    a /= m_chains;
    return 1.0 - (w - a) / var_plus;
  };

  // Geyer pairs Gamma_m = rho_{2m} + rho_{2m+1}: truncate at the first
  // negative pair, enforce monotone decrease.
  double gamma_sum = 0.0;
  double prev_pair = kInf;
  for (int m = 0; 2 * m + 1 <= max_lag; ++m) {
    double pair = rho(2 * m) + rho(2 * m + 1);
    if (pair < 0.0) break;
    pair = std::min(pair, prev_pair);
    gamma_sum += pair;
    prev_pair = pair;
  }
  const double tau = std::max(2.0 * gamma_sum - rho(0), 1.0 / len);
  const double total_draws = static_cast<double>(m_chains) * len;
  return std::min(total_draws, total_draws / tau);
}

}  // namespace cpjm
