#pragma once

#include "thermo/assimilation.hpp"
#include "thermo/calibration.hpp"
#include "thermo/nature_run.hpp"
#include "thermo/reversal.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace thermo {

/// Configuration or usage problem; maps to exit code 2 in the CLI.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct NatureSettings {
  LoopConfig loop;
  double noise_std = 2.0e-5; ///< observation noise, kg/s
  double transient_s = -1.0; ///< < 0 selects the default rule
};

struct FilterSettings {
  FilterConfig config;
  bool delta_explicit = false; ///< delta/mu given rather than defaulted
  bool mu_explicit = false;
};

struct ReversalSettings {
  ReversalThresholds thresholds;
  double rescale_amplitude = 1e-3;
  std::string training_analysis_csv;
  std::string training_truth_csv;
};

struct CalibrationSettings {
  int window_samples = 44;
  double continuity_weight = 10.0;
  int max_iter = 200;
  EmParams guess;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  NatureSettings nature;
  EmParams model;
  FilterSettings filter;
  ReversalSettings reversal;
  CalibrationSettings calibration;

  /// Stable hash of the canonical JSON the config was built from.
  std::string config_hash;
};

/// Parse and validate a config file. Unknown keys anywhere are an error;
/// `nature.T_h` and `nature.T_c` are required, everything else defaults.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig config_from_json(const nlohmann::json& j);

/// Canonical re-serialization used for hashing and sidecar metadata.
nlohmann::json config_to_json(const ExperimentConfig& c);

std::string tool_version();

/// Output root after applying the THERMO_OUTPUT_ROOT override.
std::filesystem::path resolve_output_dir(const ExperimentConfig& c);

} // namespace thermo
