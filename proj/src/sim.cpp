#include "cpjm/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <thread>

#include "cpjm/ptmvn.hpp"
#include "cpjm/sampler.hpp"

namespace cpjm {

ModelParams SimScenario::default_truth() {
  ModelParams p;
  p.gamma = Eigen::VectorXd::Constant(1, 0.18);
  p.eta = 3.76;
  p.alpha = 1.88;
  p.beta = Eigen::VectorXd::Constant(1, -0.01);
  p.sigma_y = 0.08;
  p.mu_omega = 0.90;
  p.mu_b << -0.50, -0.20, 0.60;
  p.sd_r << 0.15, 0.20, 0.27, 1.20;
  p.Gamma_r << 1.000, -0.415, -0.220, -0.280,  //
      -0.415, 1.000, 0.560, 0.200,             //
      -0.220, 0.560, 1.000, 0.185,             //
      -0.280, 0.200, 0.185, 1.000;
  return p;
}

void SimScenario::validate() const {
  if (n < 2) throw ConfigError("scenario: n must be >= 2");
  if (!(target_censoring > 0.0 && target_censoring < 1.0)) {
    throw ConfigError("scenario: target_censoring must lie in (0,1)");
  }
  if (replications < 1) throw ConfigError("scenario: replications >= 1");
  if (!(visit_interval > 0.0) || !(visit_noise_scale > 0.0)) {
    throw ConfigError("scenario: visit constants must be > 0");
  }
  try {
    truth.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("scenario: invalid truth: ") + e.what());
  }
}

namespace {

double draw_weibull_ph(const ModelParams& p, double w_cov, Rng& rng) {
  // Inverse CDF of S(t) = exp(-eta t^alpha e^{w gamma}).
  const double lin = p.gamma.size() > 0 ? p.gamma(0) * w_cov : 0.0;
  const double u = rng.uniform();
  return std::pow(-std::log(u) / (p.eta * std::exp(lin)), 1.0 / p.alpha);
}

}  // namespace

std::vector<SubjectRecord> generate_dataset(const SimScenario& scn,
                                            double censor_rate, Rng& rng) {
  scn.validate();
  if (!(censor_rate > 0.0)) {
    throw ConfigError("generate_dataset: censor_rate must be > 0");
  }
  const ModelParams& p = scn.truth;
  PtmvnParams ranef;
  ranef.mu = p.mu_r();
  ranef.Sigma = p.Sigma_r();
  ranef.lower = 0.0;

  std::vector<SubjectRecord> data;
  data.reserve(scn.n);
  for (int i = 0; i < scn.n; ++i) {
    SubjectRecord subj;
    subj.id = std::to_string(i + 1);
    const double x_cov = rng.bernoulli(0.5) ? 1.0 : 0.0;
    subj.w = Eigen::VectorXd::Constant(1, x_cov);

    const double t_event = draw_weibull_ph(p, x_cov, rng);
    const double t_cens = rng.exponential() / censor_rate;
    subj.t_obs = std::min(t_event, t_cens);
    subj.event = t_event <= t_cens;

    // Random effects bounded by the true event time.
    ranef.upper = t_event;
    const Eigen::VectorXd r = ptmvn_sample(rng, ranef);
    const double omega = r(0);
    const Eigen::Vector3d b = r.tail(3);

    // Visit schedule: |interval * j - jitter| with half-normal jitter, kept
    // while it does not pass the observed time. A redraw guards the
    // (astronomically rare) non-monotone jitter pair.
    std::vector<double> visits;
    double prev = 0.0;
    for (int j = 1; j <= 200; ++j) {
      double sj;
      do {
        const double z = std::abs(rng.normal(0.0, scn.visit_noise_scale));
        sj = std::abs(scn.visit_interval * j - z);
      } while (sj <= prev);
      if (sj > subj.t_obs) {
        if (j == 1) {
          // Event before the first scheduled visit: one early measurement.
          double s1 = 0.1 * sj;
          while (s1 > subj.t_obs) s1 *= 0.1;
          visits.push_back(s1);
        }
        break;
      }
      visits.push_back(sj);
      prev = sj;
    }
    const int n_i = static_cast<int>(visits.size());
    subj.s = Eigen::Map<Eigen::VectorXd>(visits.data(), n_i);
    subj.x = Eigen::MatrixXd::Constant(n_i, 1, x_cov);
    subj.y.resize(n_i);
    for (int j = 0; j < n_i; ++j) {
      const double delta = subj.s(j) - omega;
      double mean = p.beta(0) * x_cov + b(0) +
                    (delta <= 0.0 ? b(1) * delta : b(2) * delta);
      subj.y(j) = mean + p.sigma_y * rng.normal();
    }
    subj.validate();
    data.push_back(std::move(subj));
  }
  return data;
}

double tune_censoring_rate(const SimScenario& scn, double q, Rng& rng) {
  scn.validate();
  if (!(q > 0.01 && q < 0.99)) {
    throw SamplerError("tune_censoring_rate: target must lie in (0.01, 0.99)");
  }
  const long probes = 100000;
  const auto censored_fraction = [&](double rate, Rng& r) {
    long cens = 0;
    for (long i = 0; i < probes; ++i) {
      const double w = r.bernoulli(0.5) ? 1.0 : 0.0;
      const double t_event = draw_weibull_ph(scn.truth, w, r);
      const double t_cens = r.exponential() / rate;
      if (t_cens < t_event) ++cens;
    }
    return static_cast<double>(cens) / probes;
  };

  // Bracket the target, then bisect. Each probe re-derives its RNG stream, so
  // the bracketing evaluations share common random numbers and stay monotone
  // in the rate.
  double lo = 1e-6, hi = 1.0;
  int guard = 0;
  for (;;) {
    Rng r = rng.spawn(2);
    if (censored_fraction(hi, r) >= q) break;
    hi *= 2.0;
    if (++guard > 60) throw SamplerError("tune_censoring_rate: no upper bracket");
  }
  {
    Rng r = rng.spawn(3);
    if (censored_fraction(lo, r) > q) {
      throw SamplerError("tune_censoring_rate: no lower bracket");
    }
  }
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 60; ++it) {
    mid = 0.5 * (lo + hi);
    Rng eval_rng = rng.spawn(100 + it);
    const double frac = censored_fraction(mid, eval_rng);
    if (std::abs(frac - q) <= 0.005) return mid;
    if (frac < q) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return mid;
}

std::vector<std::string> metrics_param_order(int px) {
  std::vector<std::string> order;
  for (int k = 0; k < px; ++k) order.push_back("beta" + std::to_string(k + 1));
  order.insert(order.end(), {"sigma_y", "mu_omega", "mu_b0", "mu_b1", "mu_b2",
                             "sd_omega", "sd_b0", "sd_b1", "sd_b2"});
  return order;
}

std::map<std::string, double> truth_values(const ModelParams& truth) {
  std::map<std::string, double> t;
  for (int k = 0; k < truth.gamma.size(); ++k) {
    t["gamma" + std::to_string(k + 1)] = truth.gamma(k);
  }
  t["eta"] = truth.eta;
  t["alpha"] = truth.alpha;
  for (int k = 0; k < truth.beta.size(); ++k) {
    t["beta" + std::to_string(k + 1)] = truth.beta(k);
  }
  t["sigma_y"] = truth.sigma_y;
  t["mu_omega"] = truth.mu_omega;
  t["mu_b0"] = truth.mu_b(0);
  t["mu_b1"] = truth.mu_b(1);
  t["mu_b2"] = truth.mu_b(2);
  t["sd_omega"] = truth.sd_r(0);
  t["sd_b0"] = truth.sd_r(1);
  t["sd_b1"] = truth.sd_r(2);
  t["sd_b2"] = truth.sd_r(3);
  return t;
}

std::vector<ParamMetrics> run_replication_loop(
    int replications, std::uint64_t seed, int threads,
    const std::vector<std::string>& param_order,
    const std::map<std::string, double>& truth,
    const std::function<ReplicationOutcome(int rep, Rng& rng)>& fit_one,
    int* failed, int* nonconverged,
    std::vector<std::optional<ReplicationOutcome>>* raw) {
  if (replications < 2) {
    throw std::invalid_argument("run_replication_loop: needs >= 2 replications");
  }
  const Rng base(seed);
  std::vector<std::optional<ReplicationOutcome>> results(replications);
  std::atomic<int> next{0};
  const int n_workers =
      std::max(1, threads > 0 ? threads
                              : static_cast<int>(std::thread::hardware_concurrency()));
  auto worker = [&] {
    for (;;) {
      const int b = next.fetch_add(1);
      if (b >= replications) return;
      Rng rng = base.spawn(static_cast<std::uint64_t>(b));
      try {
        results[b] = fit_one(b, rng);
      } catch (const std::exception&) {
        results[b] = std::nullopt;
      }
    }
  };
  if (n_workers == 1 || replications == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < std::min(n_workers, replications); ++k) {
      pool.emplace_back(worker);
    }
    for (auto& th : pool) th.join();
  }

  int n_failed = 0, n_osc = 0, n_ok = 0;
  for (const auto& r : results) {
    if (!r.has_value()) {
      ++n_failed;
    } else {
      ++n_ok;
      if (!r->converged) ++n_osc;
    }
  }
  if (failed != nullptr) *failed = n_failed;
  if (nonconverged != nullptr) *nonconverged = n_osc;
  if (raw != nullptr) *raw = results;
  if (n_failed > 0.2 * replications) {
    throw SamplerError("replication loop: more than 20% of fits failed (" +
                       std::to_string(n_failed) + "/" +
                       std::to_string(replications) + ")");
  }

  std::vector<ParamMetrics> metrics;
  for (const auto& name : param_order) {
    const double theta = truth.at(name);
    double bias = 0.0, mse = 0.0, cover = 0.0;
    // Fixed reduction order over replication index for bit reproducibility.
    for (int b = 0; b < replications; ++b) {
      if (!results[b].has_value()) continue;
      const auto it = results[b]->summaries.find(name);
      if (it == results[b]->summaries.end()) {
        throw SamplerError("replication loop: fit lacks parameter " + name);
      }
      const double err = it->second.mean - theta;
      bias += err;
      mse += err * err;
      cover += (it->second.q025 <= theta && theta <= it->second.q975) ? 1.0 : 0.0;
    }
    ParamMetrics m;
    m.name = name;
    m.bias = bias / n_ok;
    m.mse = mse / n_ok;
    m.cover = 100.0 * cover / n_ok;
    metrics.push_back(m);
  }
  return metrics;
}

namespace {

ParamSummary summarize_param(const Eigen::VectorXd& pooled) {
  std::vector<double> v(pooled.data(), pooled.data() + pooled.size());
  std::sort(v.begin(), v.end());
  const auto quantile = [&](double q) {
    const double idx = q * (v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(idx);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double fr = idx - lo;
    return (1.0 - fr) * v[lo] + fr * v[hi];
  };
  return {pooled.mean(), quantile(0.025), quantile(0.975)};
}

ReplicationOutcome summarize_fit(const PosteriorDraws& draws,
                                 const std::vector<std::string>& params) {
  ReplicationOutcome out;
  for (const auto& name : params) {
    out.summaries[name] = summarize_param(draws.pooled(name));
    if (draws.num_chains() >= 2 && draws.num_samples() >= 50) {
      if (rhat(draws, name) > 1.1) out.converged = false;
    }
  }
  return out;
}

}  // namespace

MetricsTable replication_study(const SimScenario& scn, const PriorConfig& priors,
                               const SamplerConfig& cfg, Rng& rng,
                               ReplicationLog* log) {
  scn.validate();
  const double rate = tune_censoring_rate(scn, scn.target_censoring, rng);
  const auto order = metrics_param_order(static_cast<int>(scn.truth.beta.size()));
  const auto truth = truth_values(scn.truth);
  if (log != nullptr) log->censor_rate = rate;

  MetricsTable table;
  table.replications = scn.replications;

  const auto run_model = [&](bool joint, int* failed, int* nonconverged,
                             std::vector<std::optional<ReplicationOutcome>>* raw) {
    return run_replication_loop(
        scn.replications, scn.seed + (joint ? 0x4a : 0x4c), cfg.threads, order,
        truth,
        [&](int rep, Rng& rep_rng) {
          (void)rep;
          Rng gen_rng = rep_rng.spawn(1);
          Rng fit_rng = rep_rng.spawn(2);
          const auto data = generate_dataset(scn, rate, gen_rng);
          const PosteriorDraws draws =
              joint ? fit_joint(data, priors, cfg, fit_rng)
                    : fit_longitudinal_only(data, priors, cfg, fit_rng);
          return summarize_fit(draws, order);
        },
        failed, nonconverged, raw);
  };
  table.joint = run_model(true, &table.failed_joint, &table.nonconverged_joint,
                          log != nullptr ? &log->joint : nullptr);
  table.longitudinal_only =
      run_model(false, &table.failed_longitudinal,
                &table.nonconverged_longitudinal,
                log != nullptr ? &log->longitudinal_only : nullptr);
  return table;
}

std::string format_metrics_table(const MetricsTable& table) {
  std::ostringstream os;
  os << "parameter\tjoint_bias\tjoint_mse\tjoint_cover\tlong_bias\tlong_mse"
        "\tlong_cover\n";
  os << std::fixed << std::setprecision(4);
  for (std::size_t i = 0; i < table.joint.size(); ++i) {
    const auto& j = table.joint[i];
    const auto& l = table.longitudinal_only[i];
    os << j.name << "\t" << j.bias << "\t" << j.mse << "\t" << std::setprecision(1)
       << j.cover << std::setprecision(4) << "\t" << l.bias << "\t" << l.mse
       << "\t" << std::setprecision(1) << l.cover << std::setprecision(4)
       << "\n";
  }
  return os.str();
}

}  // namespace cpjm
