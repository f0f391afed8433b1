#pragma once

#include "thermo/experiment_config.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace thermo {

struct NatureOutputs {
  std::filesystem::path truth_csv;
  std::filesystem::path meta_json;
  double climatology = 0.0;
  long samples = 0;
};

/// Simulate the truth for `duration_s` seconds (after the transient) and
/// persist it with its sidecar metadata.
NatureOutputs cmd_nature(const ExperimentConfig& cfg, double duration_s,
                         const std::filesystem::path& out_dir);

struct AssimilateOutputs {
  std::filesystem::path analysis_csv;
  std::filesystem::path summary_json;
  double scaled_bg_rmse = 0.0;
  bool diverged = false;
};

AssimilateOutputs cmd_assimilate(const ExperimentConfig& cfg,
                                 const std::filesystem::path& truth_csv,
                                 const std::filesystem::path& out_dir);

struct SweepOutputs {
  std::filesystem::path csv;
  int cells_run = 0;
  int cells_resumed = 0;
  int cells_failed = 0;
};

/// Cross product of filters and windows; each cell owns one JSON file and
/// completed cells are skipped on rerun when their config hash matches.
/// The static-B filter runs its windows in ascending order, bootstrapping
/// each window's covariance estimate from the previous one.
SweepOutputs cmd_sweep(const ExperimentConfig& cfg,
                       const std::vector<FilterKind>& filters,
                       const std::vector<double>& windows_s,
                       const std::filesystem::path& truth_csv,
                       const std::filesystem::path& out_dir, int jobs);

/// Fill the bred-vector growth column of an analysis series.
std::filesystem::path cmd_breed(const ExperimentConfig& cfg,
                                const std::filesystem::path& analysis_csv,
                                const std::filesystem::path& out_csv);

struct ReversalOutputs {
  std::filesystem::path json;
};

/// Run the requested reversal tests plus residency forecasting against the
/// truth and write the combined skill report.
ReversalOutputs cmd_reversal(const ExperimentConfig& cfg,
                             const std::filesystem::path& analysis_csv,
                             const std::filesystem::path& truth_csv,
                             const std::filesystem::path& out_dir,
                             const std::vector<std::string>& tests);

std::filesystem::path cmd_calibrate(const ExperimentConfig& cfg,
                                    const std::filesystem::path& truth_csv,
                                    const std::filesystem::path& out_dir);

/// Render the text score table from a reversal skill JSON.
std::string cmd_verify(const std::filesystem::path& skill_json);

} // namespace thermo
