#include "cpjm/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

#include "cpjm/marginal.hpp"

namespace cpjm {

namespace {

void ensure_out_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw ConfigError("cannot create output directory " + dir.string() + ": " +
                      ec.message());
  }
}

std::vector<SubjectRecord> load_dataset(const RunConfig& cfg) {
  if (cfg.longitudinal_path.empty() || cfg.survival_path.empty()) {
    throw ConfigError("fit: both longitudinal and survival paths are required");
  }
  return read_dataset_csv(cfg.longitudinal_path, cfg.survival_path);
}

struct QuantileSummary {
  double mean, sd, q025, q50, q975;
};

QuantileSummary summarize_vector(std::vector<double> v) {
  QuantileSummary s{};
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  std::sort(v.begin(), v.end());
  const auto quantile = [&](double q) {
    const double idx = q * (v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(idx);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return (1.0 - (idx - lo)) * v[lo] + (idx - lo) * v[hi];
  };
  s.mean = mean;
  s.sd = std::sqrt(var / std::max(1.0, n - 1.0));
  s.q025 = quantile(0.025);
  s.q50 = quantile(0.5);
  s.q975 = quantile(0.975);
  return s;
}

}  // namespace

void cmd_simulate(const RunConfig& cfg) {
  cfg.scenario.validate();
  ensure_out_dir(cfg.out_dir);
  Rng rng(cfg.scenario.seed);
  const double rate =
      tune_censoring_rate(cfg.scenario, cfg.scenario.target_censoring, rng);
  Rng gen_rng = rng.spawn(0x5e5e);
  const auto data = generate_dataset(cfg.scenario, rate, gen_rng);
  write_dataset_csv(data, cfg.out_dir);
  write_truth_json(cfg.scenario.truth, rate, cfg.scenario.seed,
                   cfg.out_dir / "truth.json");
}

void cmd_fit(const RunConfig& cfg) {
  cfg.sampler.validate();
  if (cfg.model != "joint" && cfg.model != "longitudinal-only") {
    throw ConfigError("fit: --model must be joint or longitudinal-only");
  }
  const auto data = load_dataset(cfg);
  ensure_out_dir(cfg.out_dir);
  Rng rng(cfg.sampler.seed);
  const PosteriorDraws draws =
      cfg.model == "joint"
          ? fit_joint(data, cfg.priors, cfg.sampler, rng)
          : fit_longitudinal_only(data, cfg.priors, cfg.sampler, rng);
  write_draws_csv(draws, cfg.out_dir / "draws.csv");
  write_summary_csv(summarize_draws(draws), cfg.out_dir / "summary.csv");
}

void cmd_replicate(const RunConfig& cfg) {
  cfg.scenario.validate();
  cfg.sampler.validate();
  ensure_out_dir(cfg.out_dir);
  Rng rng(cfg.scenario.seed);
  ReplicationLog log;
  const MetricsTable table =
      replication_study(cfg.scenario, cfg.priors, cfg.sampler, rng, &log);
  {
    std::ofstream os(cfg.out_dir / "metrics.txt");
    os << format_metrics_table(table);
  }
  nlohmann::json j;
  j["replications"] = table.replications;
  j["censor_rate"] = log.censor_rate;
  j["failed"] = {{"joint", table.failed_joint},
                 {"longitudinal_only", table.failed_longitudinal}};
  j["nonconverged"] = {{"joint", table.nonconverged_joint},
                       {"longitudinal_only", table.nonconverged_longitudinal}};
  const auto dump_outcomes =
      [&](const std::vector<std::optional<ReplicationOutcome>>& raw) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& r : raw) {
          if (!r.has_value()) {
            arr.push_back(nullptr);
            continue;
          }
          nlohmann::json rec;
          rec["converged"] = r->converged;
          for (const auto& [name, summ] : r->summaries) {
            rec["params"][name] = {{"mean", summ.mean},
                                   {"q025", summ.q025},
                                   {"q975", summ.q975}};
          }
          arr.push_back(std::move(rec));
        }
        return arr;
      };
  j["joint"] = dump_outcomes(log.joint);
  j["longitudinal_only"] = dump_outcomes(log.longitudinal_only);
  std::ofstream os(cfg.out_dir / "replications.json");
  os << j.dump(2) << "\n";
}

void cmd_summarize(const RunConfig& cfg) {
  if (cfg.draws_path.empty()) {
    throw ConfigError("summarize: a draws file is required");
  }
  const PosteriorDraws draws = read_draws_csv(cfg.draws_path);
  ensure_out_dir(cfg.out_dir);

  // Column lookups; gamma/beta block sizes inferred from the header.
  const auto has = [&](const std::string& n) {
    return std::find(draws.names.begin(), draws.names.end(), n) !=
           draws.names.end();
  };
  for (const auto& required : {"mu_omega", "sd_omega"}) {
    if (!has(required)) {
      throw DataError("summarize: draws lack column " + std::string(required));
    }
  }
  if (!has("eta") || !has("alpha")) {
    throw DataError(
        "summarize: draws lack survival parameters (was this a "
        "longitudinal-only fit?)");
  }
  int pw = 0;
  while (has("gamma" + std::to_string(pw + 1))) ++pw;
  int px = 0;
  while (has("beta" + std::to_string(px + 1))) ++px;

  const Eigen::VectorXd mu_omega = draws.pooled("mu_omega");
  const Eigen::VectorXd sd_omega = draws.pooled("sd_omega");
  const Eigen::VectorXd eta = draws.pooled("eta");
  const Eigen::VectorXd alpha = draws.pooled("alpha");
  std::vector<Eigen::VectorXd> gamma_cols;
  for (int k = 0; k < pw; ++k) {
    gamma_cols.push_back(draws.pooled("gamma" + std::to_string(k + 1)));
  }
  Eigen::MatrixXd w_row(1, pw);
  w_row.setConstant(cfg.w_fixed);

  const long n_draws = mu_omega.size();
  std::vector<double> m_omega(n_draws);
  for (long d = 0; d < n_draws; ++d) {
    Eigen::VectorXd gamma(pw);
    for (int k = 0; k < pw; ++k) gamma(k) = gamma_cols[k](d);
    m_omega[d] = population_mean_changepoint(mu_omega(d), sd_omega(d), gamma,
                                             eta(d), alpha(d), w_row);
  }
  {
    const QuantileSummary s = summarize_vector(m_omega);
    std::ofstream os(cfg.out_dir / "mean_changepoint.csv");
    os << "quantity,mean,sd,q2.5,q50,q97.5\n";
    os << "mean_changepoint," << format_double(s.mean) << ","
       << format_double(s.sd) << "," << format_double(s.q025) << ","
       << format_double(s.q50) << "," << format_double(s.q975) << "\n";
  }

  // Posterior marginal mean curves for each requested event time.
  const Eigen::VectorXd sigma_y = draws.pooled("sigma_y");
  std::vector<Eigen::VectorXd> mu_b_cols, sd_cols, beta_cols;
  for (const auto& n : {"mu_b0", "mu_b1", "mu_b2"}) {
    mu_b_cols.push_back(draws.pooled(n));
  }
  for (const auto& n : {"sd_omega", "sd_b0", "sd_b1", "sd_b2"}) {
    sd_cols.push_back(draws.pooled(n));
  }
  for (int k = 0; k < px; ++k) {
    beta_cols.push_back(draws.pooled("beta" + std::to_string(k + 1)));
  }
  static const char* var_names[4] = {"omega", "b0", "b1", "b2"};
  std::vector<Eigen::VectorXd> corr_cols;
  for (int i = 1; i < 4; ++i) {
    for (int j = 0; j < i; ++j) {
      const std::string n =
          std::string("corr_") + var_names[i] + "_" + var_names[j];
      if (!has(n)) throw DataError("summarize: draws lack column " + n);
      corr_cols.push_back(draws.pooled(n));
    }
  }

  int curve_index = 0;
  for (double tstar : cfg.tstar_grid) {
    if (!(tstar > 0.0)) throw ConfigError("summarize: t* values must be > 0");
    std::vector<double> visits;
    for (double t = 0.1; t <= tstar + 1e-12; t += 0.1) visits.push_back(t);
    if (visits.empty()) visits.push_back(0.5 * tstar);
    const Eigen::VectorXd s =
        Eigen::Map<const Eigen::VectorXd>(visits.data(), visits.size());
    const Eigen::MatrixXd x =
        Eigen::MatrixXd::Constant(s.size(), px, cfg.x_fixed);
    std::vector<std::vector<double>> curves(s.size());
    for (long d = 0; d < n_draws; ++d) {
      PtmvnParams ranef;
      ranef.mu.resize(4);
      ranef.mu << mu_omega(d), mu_b_cols[0](d), mu_b_cols[1](d),
          mu_b_cols[2](d);
      Eigen::Vector4d sd;
      for (int k = 0; k < 4; ++k) sd(k) = sd_cols[k](d);
      Eigen::Matrix4d corr = Eigen::Matrix4d::Identity();
      int c = 0;
      for (int i = 1; i < 4; ++i) {
        for (int j = 0; j < i; ++j, ++c) {
          corr(i, j) = corr(j, i) = corr_cols[c](d);
        }
      }
      ranef.Sigma = sd.asDiagonal() * corr * sd.asDiagonal();
      ranef.lower = 0.0;
      ranef.upper = tstar;
      Eigen::VectorXd beta(px);
      for (int k = 0; k < px; ++k) beta(k) = beta_cols[k](d);
      const Eigen::VectorXd mean = marginal_mean_y(x, s, beta, ranef);
      for (int j = 0; j < s.size(); ++j) curves[j].push_back(mean(j));
    }
    ++curve_index;
    std::ofstream os(cfg.out_dir /
                     ("mean_curve_" + std::to_string(curve_index) + ".csv"));
    os << "tstar,visit_time,mean,q2.5,q97.5\n";
    for (int j = 0; j < s.size(); ++j) {
      const QuantileSummary q = summarize_vector(curves[j]);
      os << format_double(tstar) << "," << format_double(s(j)) << ","
         << format_double(q.mean) << "," << format_double(q.q025) << ","
         << format_double(q.q975) << "\n";
    }
  }
}

}  // namespace cpjm
