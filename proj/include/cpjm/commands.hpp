#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cpjm/io.hpp"
#include "cpjm/sim.hpp"

namespace cpjm {

/// Everything a command needs, assembled from the config file plus flag
/// overrides by the CLI layer.
struct RunConfig {
  SimScenario scenario;
  PriorConfig priors;
  SamplerConfig sampler;
  std::filesystem::path out_dir = "out";
  std::filesystem::path longitudinal_path;
  std::filesystem::path survival_path;
  std::filesystem::path draws_path;
  std::string model = "joint";  // or "longitudinal-only"
  std::vector<double> tstar_grid;
  double w_fixed = 0.0;
  double x_fixed = 0.0;
};

/// Tunes the censoring rate to the scenario target, draws one dataset and
/// writes longitudinal.csv, survival.csv and truth.json under out_dir.
void cmd_simulate(const RunConfig& cfg);

/// Reads the CSV pair, fits the requested model and writes draws.csv plus
/// summary.csv under out_dir.
void cmd_fit(const RunConfig& cfg);

/// Runs the full replication study and writes metrics.txt (one row per
/// parameter) and replications.json (per-replication summaries) to out_dir.
void cmd_replicate(const RunConfig& cfg);

/// Reads a draws file, computes the posterior of the population mean change
/// point and marginal mean curves at the requested event times; writes
/// mean_changepoint.csv and mean_curve_*.csv under out_dir.
void cmd_summarize(const RunConfig& cfg);

}  // namespace cpjm
