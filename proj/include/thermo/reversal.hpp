#pragma once

#include "thermo/core_models.hpp"
#include "thermo/verification.hpp"

#include <array>
#include <map>
#include <optional>
#include <vector>

namespace thermo {

/// Sign change of the truth mass flow rate between consecutive samples.
struct ReversalEvent {
  long index = 0; ///< sample index at which the new sign first holds
  bool ccw_to_cw = false;
};

/// One oscillation of the analysis trajectory: the span between
/// consecutive local minima of |x1| (half-open, [start, end)).
struct OscillationSegment {
  long start = 0;
  long end = 0;
  double x1_max = 0.0;
};

/// Typical residency durations for 1..6 oscillations, minutes.
inline constexpr std::array<double, kResidencyCategories> kTypicalResidencyMin =
    {11.48, 23.09, 33.72, 44.38, 55.11, 66.08};

/// Category (1..6) whose typical duration is nearest; durations beyond the
/// last category clamp to 6 (callers may count those via the table).
int residency_category(double residency_minutes);

struct AmplitudeResidencyRow {
  double x1_max = 0.0;
  double residency_minutes = 0.0;
  int category = 1;
};

struct AmplitudeResidencyTable {
  std::vector<AmplitudeResidencyRow> rows;
  long clamped_count = 0; ///< events longer than any category's typical time

  /// Marginal distribution of categories (the climatological forecast);
  /// uniform if the table is empty.
  ResidencyForecast climatology() const;
};

/// Thresholds and horizons of the three reversal tests.
struct ReversalThresholds {
  double rho_corr = 1.42;
  int lambda_corr = 18;
  double rho_bv = 0.6786;
  int lambda_lead = 7;
  int horizon = 20; ///< cycles within which a forecast reversal must occur
};

/// Strict sign changes between consecutive samples; zero samples take the
/// sign of the following sample.
std::vector<ReversalEvent> detect_truth_reversals(const std::vector<double>& q);

/// True if the model forecast from `analysis` changes the sign of x1
/// within lambda_lead windows of steps_per_window model steps each.
bool lead_test(const EmState& analysis, const EmParams& params,
               int lambda_lead, int steps_per_window);

/// True if the bred-vector growth rate strictly exceeds the threshold.
bool bv_test(double growth, double rho_bv);

struct CorrResult {
  bool triggered = false;
  bool degenerate = false; ///< zero variance in the x2 history
};

/// Least-squares slope of x1 against x2 over the most recent lambda_corr
/// points; triggers when the slope strictly exceeds rho_corr.
CorrResult corr_test(const std::vector<double>& x1_history,
                     const std::vector<double>& x2_history, int lambda_corr,
                     double rho_corr);

/// Partition a series into oscillation segments bounded by local minima
/// of |x1|.
std::vector<OscillationSegment> segment_oscillations(
    const std::vector<double>& x1);

/// Build the amplitude/residency training table from an analysis x1 series
/// and the truth reversal events on the same cycle indexing.
AmplitudeResidencyTable build_residency_table(const std::vector<double>& x1,
                                              const std::vector<long>& events,
                                              double window_s);

/// Empirical residency distribution among training rows with amplitude in
/// (x1_max - 0.5, x1_max + 0.5); climatology fallback when the bin is empty.
struct ResidencyForecastResult {
  ResidencyForecast probabilities{};
  bool used_climatology = false;
};
ResidencyForecastResult residency_forecast(double x1_max,
                                           const AmplitudeResidencyTable& table);

/// Outcome bookkeeping of a trigger series against truth events.
/// A trigger at cycle k points at the earliest event in (k, k + horizon];
/// an event with at least one pointing trigger is one hit, an unwarned
/// event is one miss, a trigger pointing at nothing is a false-alarm
/// cycle, and everything else counts as a correct-negative cycle.
struct LabelledOutcomes {
  ContingencyTable table;
  /// warned event index -> cycle of the first trigger pointing at it
  std::map<long, long> first_trigger;
  long first_cycle = 0;
  long last_cycle = 0;
};
LabelledOutcomes label_outcomes(const std::vector<bool>& triggers,
                                const std::vector<long>& events, int horizon,
                                long first_cycle = 0);

struct WarningTimes {
  std::vector<double> seconds;      ///< one per hit
  std::map<long, long> histogram;   ///< warning cycles -> count
  double mean_s = 0.0;
  double median_s = 0.0;
};
WarningTimes warning_times(const LabelledOutcomes& outcomes, double window_s);

/// Oscillation amplitude available at trigger time: the largest |x1| of
/// the current analysis segment combined with the lead forecast up to its
/// first predicted sign change. Future truth is never consulted.
double trigger_amplitude(const std::vector<Eigen::Vector3d>& analyses, long k,
                         const EmParams& params, int lambda_lead,
                         int steps_per_window);

} // namespace thermo
