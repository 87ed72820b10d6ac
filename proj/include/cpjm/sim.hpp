#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cpjm/fit.hpp"
#include "cpjm/model.hpp"

namespace cpjm {

/// Simulation scenario: sample size, censoring target, generating truth and
/// visit-process constants. Defaults reproduce the reference operating
/// characteristics study (one shared Bernoulli(1/2) covariate for both
/// submodels).
struct SimScenario {
  int n = 100;
  double target_censoring = 0.20;
  ModelParams truth = default_truth();
  double visit_interval = 0.1;      // years between scheduled visits
  double visit_noise_scale = 0.02;  // half-normal scale of visit jitter
  int replications = 100;
  std::uint64_t seed = 1;

  static ModelParams default_truth();
  void validate() const;
};

struct ParamMetrics {
  std::string name;
  double bias = 0.0;
  double mse = 0.0;
  double cover = 0.0;  // percent
};

struct MetricsTable {
  std::vector<ParamMetrics> joint;
  std::vector<ParamMetrics> longitudinal_only;
  int replications = 0;
  int failed_joint = 0;
  int failed_longitudinal = 0;
  int nonconverged_joint = 0;  // any structural split-Rhat above 1.1
  int nonconverged_longitudinal = 0;
};

/// Draws one dataset: Weibull PH event times, exponential censoring at the
/// given rate, partially truncated normal random effects bounded by the true
/// event time, jittered visit schedule with the early-event fallback, and
/// Gaussian outcomes around the piecewise-linear mean.
std::vector<SubjectRecord> generate_dataset(const SimScenario& scn,
                                            double censor_rate, Rng& rng);

/// Bisection on the exponential censoring rate until the Monte Carlo
/// censored fraction is within 0.005 of q. Throws SamplerError when no
/// bracket exists (q too extreme).
double tune_censoring_rate(const SimScenario& scn, double q, Rng& rng);

// ---------------------------------------------------------------------------
// Replication harness
// ---------------------------------------------------------------------------

/// Posterior summary of one parameter in one fitted replication.
struct ParamSummary {
  double mean = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
};

struct ReplicationOutcome {
  std::map<std::string, ParamSummary> summaries;
  bool converged = true;  // structural split-Rhat all <= 1.1
};

/// Generic loop: runs fit_one for b = 0..B-1 with deterministically derived
/// RNG streams (possibly across threads), compares each parameter summary to
/// the truth, and reduces to bias / MSE / coverage in a fixed order. Failed
/// replications (exceptions) are excluded; more than 20% failures throws.
std::vector<ParamMetrics> run_replication_loop(
    int replications, std::uint64_t seed, int threads,
    const std::vector<std::string>& param_order,
    const std::map<std::string, double>& truth,
    const std::function<ReplicationOutcome(int rep, Rng& rng)>& fit_one,
    int* failed = nullptr, int* nonconverged = nullptr,
    std::vector<std::optional<ReplicationOutcome>>* raw = nullptr);

/// Per-replication outcomes of both models (empty optional = failed fit).
struct ReplicationLog {
  std::vector<std::optional<ReplicationOutcome>> joint;
  std::vector<std::optional<ReplicationOutcome>> longitudinal_only;
  double censor_rate = 0.0;
};

/// Full operating-characteristics study: per replication, generate a dataset
/// at the tuned censoring rate and fit both the joint and the
/// longitudinal-only model.
MetricsTable replication_study(const SimScenario& scn, const PriorConfig& priors,
                               const SamplerConfig& cfg, Rng& rng,
                               ReplicationLog* log = nullptr);

/// Parameter rows reported by the metrics table, in reporting order.
std::vector<std::string> metrics_param_order(int px);

/// Plain-text rendering of the metrics table (one row per parameter,
/// bias/MSE/coverage columns per model).
std::string format_metrics_table(const MetricsTable& table);

/// True values keyed by parameter name (structural scalars only).
std::map<std::string, double> truth_values(const ModelParams& truth);

}  // namespace cpjm
