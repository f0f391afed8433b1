#include "thermo/reversal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace thermo {

int residency_category(double residency_minutes) {
  int best = 1;
  double best_dist = std::abs(residency_minutes - kTypicalResidencyMin[0]);
  for (int k = 2; k <= kResidencyCategories; ++k) {
    const double d = std::abs(residency_minutes - kTypicalResidencyMin[k - 1]);
    if (d < best_dist) {
      best = k;
      best_dist = d;
    }
  }
  return best;
}

ResidencyForecast AmplitudeResidencyTable::climatology() const {
  ResidencyForecast f{};
  if (rows.empty()) {
    f.fill(1.0 / kResidencyCategories);
    return f;
  }
  for (const auto& r : rows) f[r.category - 1] += 1.0;
  for (double& p : f) p /= static_cast<double>(rows.size());
  return f;
}

std::vector<ReversalEvent> detect_truth_reversals(const std::vector<double>& q) {
  if (q.size() < 2)
    throw std::invalid_argument("detect_truth_reversals: need >= 2 samples");
  // effective sign: zeros inherit the sign of the next sample
  std::vector<int> sign(q.size(), 0);
  for (size_t i = 0; i < q.size(); ++i)
    sign[i] = (q[i] > 0.0) ? 1 : (q[i] < 0.0 ? -1 : 0);
  for (size_t i = q.size(); i-- > 0;)
    if (sign[i] == 0 && i + 1 < q.size()) sign[i] = sign[i + 1];

  std::vector<ReversalEvent> events;
  for (size_t i = 1; i < q.size(); ++i) {
    if (sign[i - 1] != 0 && sign[i] != 0 && sign[i] != sign[i - 1]) {
      ReversalEvent e;
      e.index = static_cast<long>(i);
      e.ccw_to_cw = sign[i - 1] > 0;
      events.push_back(e);
    }
  }
  return events;
}

bool lead_test(const EmState& analysis, const EmParams& params,
               int lambda_lead, int steps_per_window) {
  if (lambda_lead <= 0) return false;
  const double start_sign = analysis[0];
  EmState x = analysis;
  for (int s = 0; s < lambda_lead * steps_per_window; ++s) {
    x = rk4_step([&params](const EmState& v) { return em_rhs(v, params); }, x,
                 kModelStep);
    if (x[0] == 0.0 || (x[0] > 0.0) != (start_sign > 0.0)) return true;
  }
  return false;
}

bool bv_test(double growth, double rho_bv) {
  if (!std::isfinite(growth))
    throw std::invalid_argument("bv_test: growth must be finite");
  return growth > rho_bv;
}

CorrResult corr_test(const std::vector<double>& x1_history,
                     const std::vector<double>& x2_history, int lambda_corr,
                     double rho_corr) {
  if (lambda_corr < 2)
    throw std::invalid_argument("corr_test: lambda_corr must be >= 2");
  if (x1_history.size() < static_cast<size_t>(lambda_corr) ||
      x2_history.size() < static_cast<size_t>(lambda_corr))
    throw std::invalid_argument("corr_test: history shorter than lambda_corr");

  const size_t n1 = x1_history.size();
  const size_t n2 = x2_history.size();
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < lambda_corr; ++i) {
    mx += x2_history[n2 - 1 - i];
    my += x1_history[n1 - 1 - i];
  }
  mx /= lambda_corr;
  my /= lambda_corr;
  double sxx = 0.0, sxy = 0.0;
  for (int i = 0; i < lambda_corr; ++i) {
    const double dx = x2_history[n2 - 1 - i] - mx;
    const double dy = x1_history[n1 - 1 - i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
  }
  CorrResult r;
  if (sxx == 0.0) {
    r.degenerate = true;
    return r;
  }
  r.triggered = (sxy / sxx) > rho_corr;
  return r;
}

std::vector<OscillationSegment> segment_oscillations(
    const std::vector<double>& x1) {
  if (x1.empty()) return {};
  std::vector<long> bounds;
  bounds.push_back(0);
  for (size_t k = 1; k + 1 < x1.size(); ++k) {
    const double prev = std::abs(x1[k - 1]);
    const double cur = std::abs(x1[k]);
    const double next = std::abs(x1[k + 1]);
    if (cur <= prev && cur < next) bounds.push_back(static_cast<long>(k));
  }
  bounds.push_back(static_cast<long>(x1.size()));

  std::vector<OscillationSegment> segs;
  for (size_t j = 0; j + 1 < bounds.size(); ++j) {
    if (bounds[j + 1] == bounds[j]) continue;
    OscillationSegment s;
    s.start = bounds[j];
    s.end = bounds[j + 1];
    s.x1_max = 0.0;
    for (long i = s.start; i < s.end; ++i)
      s.x1_max = std::max(s.x1_max, std::abs(x1[i]));
    segs.push_back(s);
  }
  return segs;
}

AmplitudeResidencyTable build_residency_table(const std::vector<double>& x1,
                                              const std::vector<long>& events,
                                              double window_s) {
  AmplitudeResidencyTable table;
  if (events.size() < 2) return table;
  const auto segs = segment_oscillations(x1);
  if (segs.empty()) return table;
  auto segment_max_before = [&segs](long event_index) -> double {
    // the oscillation in progress just before the event; segments are
    // contiguous and cover the whole series
    const long probe = std::max(0L, event_index - 1);
    auto it = std::upper_bound(
        segs.begin(), segs.end(), probe,
        [](long v, const OscillationSegment& s) { return v < s.start; });
    if (it != segs.begin()) --it;
    return it->x1_max;
  };
  for (size_t j = 0; j + 1 < events.size(); ++j) {
    AmplitudeResidencyRow row;
    row.residency_minutes = (events[j + 1] - events[j]) * window_s / 60.0;
    row.x1_max = segment_max_before(events[j]);
    row.category = residency_category(row.residency_minutes);
    const double beyond =
        kTypicalResidencyMin.back() +
        0.5 * (kTypicalResidencyMin.back() -
               kTypicalResidencyMin[kResidencyCategories - 2]);
    if (row.residency_minutes > beyond) ++table.clamped_count;
    table.rows.push_back(row);
  }
  return table;
}

ResidencyForecastResult residency_forecast(double x1_max,
                                           const AmplitudeResidencyTable& table) {
  ResidencyForecastResult out;
  long count = 0;
  ResidencyForecast f{};
  for (const auto& r : table.rows) {
    if (std::abs(r.x1_max - x1_max) < 0.5) {
      f[r.category - 1] += 1.0;
      ++count;
    }
  }
  if (count == 0) {
    out.probabilities = table.climatology();
    out.used_climatology = true;
    return out;
  }
  for (double& p : f) p /= static_cast<double>(count);
  out.probabilities = f;
  return out;
}

LabelledOutcomes label_outcomes(const std::vector<bool>& triggers,
                                const std::vector<long>& events, int horizon,
                                long first_cycle) {
  if (horizon < 0) throw std::invalid_argument("label_outcomes: bad horizon");
  LabelledOutcomes out;
  const long n_total = static_cast<long>(triggers.size());
  const long last_cycle = n_total - 1 - horizon;
  out.first_cycle = first_cycle;
  out.last_cycle = last_cycle;
  if (last_cycle < first_cycle) {
    out.table.correct_negatives = 0;
    return out;
  }

  // considered events: warnable by some considered cycle
  std::vector<long> considered;
  for (long e : events)
    if (e > first_cycle && e <= last_cycle + horizon) considered.push_back(e);
  std::sort(considered.begin(), considered.end());

  long false_alarm_cycles = 0;
  for (long k = first_cycle; k <= last_cycle; ++k) {
    if (!triggers[k]) continue;
    // earliest event in (k, k + horizon]
    auto it = std::upper_bound(considered.begin(), considered.end(), k);
    if (it != considered.end() && *it <= k + horizon) {
      const long event = *it;
      auto [existing, inserted] = out.first_trigger.try_emplace(event, k);
      (void)existing;
      (void)inserted;
    } else {
      ++false_alarm_cycles;
    }
  }

  const long warned = static_cast<long>(out.first_trigger.size());
  const long n = last_cycle - first_cycle + 1;
  out.table.hits = warned;
  out.table.false_alarms = false_alarm_cycles;
  out.table.misses = static_cast<long>(considered.size()) - warned;
  out.table.correct_negatives =
      n - out.table.hits - out.table.false_alarms - out.table.misses;
  return out;
}

double trigger_amplitude(const std::vector<Eigen::Vector3d>& analyses, long k,
                         const EmParams& params, int lambda_lead,
                         int steps_per_window) {
  if (k < 0 || k >= static_cast<long>(analyses.size()))
    throw std::invalid_argument("trigger_amplitude: cycle out of range");
  // history part: walk back to the last local minimum of |x1| at or
  // before k (the start of the oscillation in progress)
  long start = 0;
  for (long j = k - 1; j >= 1; --j) {
    const double prev = std::abs(analyses[j - 1][0]);
    const double cur = std::abs(analyses[j][0]);
    const double next = std::abs(analyses[j + 1][0]);
    if (cur <= prev && cur < next) {
      start = j;
      break;
    }
  }
  double amp = 0.0;
  for (long j = start; j <= k; ++j)
    amp = std::max(amp, std::abs(analyses[j][0]));

  // forecast part: follow the lead integration until the predicted
  // reversal (or the full lead horizon)
  EmState x = analyses[k];
  const double sign0 = x[0];
  for (int s = 0; s < lambda_lead * steps_per_window; ++s) {
    x = rk4_step([&params](const EmState& v) { return em_rhs(v, params); }, x,
                 kModelStep);
    if (x[0] == 0.0 || (x[0] > 0.0) != (sign0 > 0.0)) break;
    amp = std::max(amp, std::abs(x[0]));
  }
  return amp;
}

WarningTimes warning_times(const LabelledOutcomes& outcomes, double window_s) {
  WarningTimes w;
  for (const auto& [event, trigger] : outcomes.first_trigger) {
    const long cycles = event - trigger;
    w.histogram[cycles] += 1;
    w.seconds.push_back(cycles * window_s);
  }
  if (!w.seconds.empty()) {
    std::vector<double> s = w.seconds;
    std::sort(s.begin(), s.end());
    double sum = 0.0;
    for (double v : s) sum += v;
    w.mean_s = sum / s.size();
    w.median_s = (s.size() % 2 == 1)
                     ? s[s.size() / 2]
                     : 0.5 * (s[s.size() / 2 - 1] + s[s.size() / 2]);
  }
  return w;
}

} // namespace thermo
