#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace thermo {

/// Two-by-two contingency counts for a yes/no forecast.
struct ContingencyTable {
  std::int64_t hits = 0;              // a
  std::int64_t false_alarms = 0;      // b
  std::int64_t misses = 0;            // c
  std::int64_t correct_negatives = 0; // d

  std::int64_t total() const {
    return hits + false_alarms + misses + correct_negatives;
  }
};

/// Categorical scores; a score whose denominator is zero is absent rather
/// than zero.
struct CategoricalScores {
  std::optional<double> ts;  ///< threat score a/(a+b+c)
  std::optional<double> far; ///< false alarm ratio b/(a+b)
  std::optional<double> pod; ///< probability of detection a/(a+c)
};

CategoricalScores categorical_scores(const ContingencyTable& t);

inline constexpr int kResidencyCategories = 6;

/// Probabilities over 1..6 oscillations of residency.
using ResidencyForecast = std::array<double, kResidencyCategories>;

/// Ranked probability score of a forecast against an observed category
/// (1-based). Zero iff the forecast puts all mass on the observed category.
double rps(const ResidencyForecast& forecast, int observed_category);

/// Skill of a set of forecast scores against climatology scores for the
/// same events: 1 - aggregate(forecast)/aggregate(climatology).
enum class Aggregate { kMean, kMedian };
std::optional<double> rps_skill(const std::vector<double>& forecast_scores,
                                const std::vector<double>& climatology_scores,
                                Aggregate aggregate);

/// Root-mean-square of residuals divided by the climatology scale.
double scaled_rmse(const std::vector<double>& residuals, double climatology);

/// Integer-percent rendering used by score tables: round half away from
/// zero; POD strictly between 99.5% and 100% renders as ">99".
std::string percent_string(double fraction, bool pod_convention = false);

/// Full report row for one reversal test.
struct SkillReport {
  ContingencyTable table;
  CategoricalScores categorical;
  std::optional<double> rps_avg;
  std::optional<double> rps_med;
};

/// Render reports as a fixed-width text table (header + one line per test).
std::string render_skill_table(
    const std::vector<std::pair<std::string, SkillReport>>& rows);

} // namespace thermo
