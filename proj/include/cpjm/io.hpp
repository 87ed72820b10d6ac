#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cpjm/model.hpp"
#include "cpjm/sampler.hpp"
#include "cpjm/sim.hpp"

namespace cpjm {

/// Serializes every number with 17 significant digits so read-back is exact.
std::string format_double(double x);

/// Writes longitudinal.csv (subject_id, visit_time, y, x1..xp) and
/// survival.csv (subject_id, time, event, w1..wq) under dir.
void write_dataset_csv(const std::vector<SubjectRecord>& data,
                       const std::filesystem::path& dir);

/// Reads the pair written by write_dataset_csv, joining on subject id and
/// enforcing per-subject invariants. Errors name the file and line.
std::vector<SubjectRecord> read_dataset_csv(
    const std::filesystem::path& longitudinal_csv,
    const std::filesystem::path& survival_csv);

/// Generating truth, censoring rate and seed as a JSON record.
void write_truth_json(const ModelParams& truth, double censor_rate,
                      std::uint64_t seed, const std::filesystem::path& path);
ModelParams read_truth_json(const std::filesystem::path& path,
                            double* censor_rate = nullptr,
                            std::uint64_t* seed = nullptr);

/// Draws as CSV: chain, iteration, then one column per constrained
/// parameter.
void write_draws_csv(const PosteriorDraws& draws,
                     const std::filesystem::path& path);
PosteriorDraws read_draws_csv(const std::filesystem::path& path);

struct SummaryRow {
  std::string name;
  double mean = 0.0, sd = 0.0, q025 = 0.0, q50 = 0.0, q975 = 0.0;
  double rhat_value = 0.0, ess_value = 0.0;
};

/// Per-parameter posterior summary (mean, sd, quantiles, diagnostics).
std::vector<SummaryRow> summarize_draws(const PosteriorDraws& draws);
void write_summary_csv(const std::vector<SummaryRow>& rows,
                       const std::filesystem::path& path);

}  // namespace cpjm
