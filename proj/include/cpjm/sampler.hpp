#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cpjm/errors.hpp"
#include "cpjm/rng.hpp"

namespace cpjm {

/// Log density with optional gradient; grad may be null. A return of -inf
/// marks zero posterior mass (the sampler treats it as a divergence).
using LogDensity =
    std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

struct SamplerConfig {
  int chains = 4;
  int warmup = 1000;
  int samples = 1000;
  std::uint64_t seed = 1;
  double target_accept = 0.8;
  int max_tree_depth = 10;
  double init_jitter = 2.0;
  bool adapt = true;
  /// Dynamic (no-U-turn) trajectories by default; a fixed-length leapfrog
  /// fallback is kept behind this switch for debugging.
  bool nuts = true;
  int static_steps = 32;
  bool retain_latent = false;
  int threads = 0;  // 0 = one thread per chain

  void validate() const;
};

struct ChainDiagnostics {
  int divergences = 0;
  int max_depth_hits = 0;
  double step_size = 0.0;
  double mean_accept = 0.0;
};

/// Post-warmup draws on the constrained scale, chains kept separate.
struct PosteriorDraws {
  std::vector<std::string> names;
  std::vector<Eigen::MatrixXd> chains;  // each samples x dim
  std::vector<ChainDiagnostics> diagnostics;

  int num_chains() const { return static_cast<int>(chains.size()); }
  int num_samples() const {
    return chains.empty() ? 0 : static_cast<int>(chains.front().rows());
  }
  int index_of(const std::string& name) const;
  /// One chain's column for a named parameter.
  Eigen::VectorXd chain_column(int chain, const std::string& name) const;
  /// All chains stacked (chain-major order).
  Eigen::VectorXd pooled(const std::string& name) const;
};

/// Runs cfg.chains NUTS chains over the target. init seeds every chain;
/// chains beyond the first add a small unconstrained-scale jitter (retried
/// until the density is finite). constrain maps an unconstrained point to
/// the stored constrained values (pass an empty function for identity).
/// Deterministic given (cfg.seed, cfg); chains use independent RNG streams.
PosteriorDraws sample(const LogDensity& target, const Eigen::VectorXd& init,
                      const std::vector<std::string>& names,
                      const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& constrain,
                      const SamplerConfig& cfg);

/// Split-chain potential scale reduction factor. Needs >= 2 chains of >= 50
/// draws. Chains with zero total variance return 1.0 by convention.
double rhat(const PosteriorDraws& draws, const std::string& name);

/// Effective sample size across chains via Geyer initial-positive-sequence
/// truncation of the autocorrelation sum, clipped to the total draw count.
/// Degenerate (zero-variance) chains return 0.
double ess(const PosteriorDraws& draws, const std::string& name);

}  // namespace cpjm
