#pragma once

#include "thermo/assimilation.hpp"
#include "thermo/nature_run.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace thermo {

/// Shortest round-trip-safe decimal rendering of a double; output is
/// stable for a fixed build, which is what the reproducibility contract
/// of the CSV artifacts requires.
std::string format_double(double v);

void write_truth_csv(const std::filesystem::path& path,
                     const TruthSeries& series);

struct TruthCsv {
  std::vector<double> times;
  std::vector<double> q;
};
TruthCsv read_truth_csv(const std::filesystem::path& path);

void write_analysis_csv(const std::filesystem::path& path,
                        const std::vector<AnalysisRecord>& records);
std::vector<AnalysisRecord> read_analysis_csv(const std::filesystem::path& path);

void write_sweep_csv(
    const std::filesystem::path& path,
    const std::vector<std::tuple<std::string, double, double>>& rows);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

} // namespace thermo
