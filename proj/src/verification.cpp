#include "thermo/verification.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace thermo {

CategoricalScores categorical_scores(const ContingencyTable& t) {
  if (t.hits < 0 || t.false_alarms < 0 || t.misses < 0 ||
      t.correct_negatives < 0)
    throw std::invalid_argument("contingency counts must be nonnegative");
  if (t.total() <= 0)
    throw std::invalid_argument("contingency table is empty");
  CategoricalScores s;
  const double a = static_cast<double>(t.hits);
  const double b = static_cast<double>(t.false_alarms);
  const double c = static_cast<double>(t.misses);
  if (a + b + c > 0) s.ts = a / (a + b + c);
  if (a + b > 0) s.far = b / (a + b);
  if (a + c > 0) s.pod = a / (a + c);
  return s;
}

double rps(const ResidencyForecast& forecast, int observed_category) {
  if (observed_category < 1 || observed_category > kResidencyCategories)
    throw std::invalid_argument("rps: observed category out of range");
  double sum = 0.0;
  for (double p : forecast) {
    if (p < -1e-12 || p > 1.0 + 1e-12)
      throw std::invalid_argument("rps: probabilities out of [0,1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("rps: probabilities must sum to 1");

  double cdf_f = 0.0;
  double score = 0.0;
  for (int k = 1; k <= kResidencyCategories; ++k) {
    cdf_f += forecast[k - 1];
    const double cdf_o = (k >= observed_category) ? 1.0 : 0.0;
    score += (cdf_f - cdf_o) * (cdf_f - cdf_o);
  }
  return score;
}

namespace {
double aggregate_of(const std::vector<double>& v, Aggregate a) {
  if (a == Aggregate::kMean)
    return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  std::vector<double> s = v;
  std::sort(s.begin(), s.end());
  const size_t n = s.size();
  return (n % 2 == 1) ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
}
} // namespace

std::optional<double> rps_skill(const std::vector<double>& forecast_scores,
                                const std::vector<double>& climatology_scores,
                                Aggregate aggregate) {
  if (forecast_scores.empty() || climatology_scores.empty())
    throw std::invalid_argument("rps_skill: empty score list");
  if (forecast_scores.size() != climatology_scores.size())
    throw std::invalid_argument("rps_skill: score lists must pair per event");
  const double denom = aggregate_of(climatology_scores, aggregate);
  if (denom == 0.0) return std::nullopt;
  return 1.0 - aggregate_of(forecast_scores, aggregate) / denom;
}

double scaled_rmse(const std::vector<double>& residuals, double climatology) {
  if (!(climatology > 0.0))
    throw std::invalid_argument("scaled_rmse: climatology must be > 0");
  if (residuals.empty())
    throw std::invalid_argument("scaled_rmse: empty residual series");
  double s = 0.0;
  for (double v : residuals) s += v * v;
  return std::sqrt(s / residuals.size()) / climatology;
}

std::string percent_string(double fraction, bool pod_convention) {
  if (pod_convention && fraction > 0.995 && fraction < 1.0) return ">99";
  const double pct = 100.0 * fraction;
  const long long rounded =
      static_cast<long long>(pct >= 0 ? std::floor(pct + 0.5)
                                      : std::ceil(pct - 0.5));
  return std::to_string(rounded);
}

std::string render_skill_table(
    const std::vector<std::pair<std::string, SkillReport>>& rows) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-14s %6s %6s %6s %9s %9s\n", "method",
                "TS", "FAR", "POD", "RPS-avg", "RPS-med");
  out += line;
  auto cell = [](const std::optional<double>& v, bool pod = false) {
    return v ? percent_string(*v, pod) : std::string("-");
  };
  for (const auto& [name, rep] : rows) {
    std::snprintf(line, sizeof(line), "%-14s %6s %6s %6s %9s %9s\n",
                  name.c_str(), cell(rep.categorical.ts).c_str(),
                  cell(rep.categorical.far).c_str(),
                  cell(rep.categorical.pod, true).c_str(),
                  cell(rep.rps_avg).c_str(), cell(rep.rps_med).c_str());
    out += line;
  }
  return out;
}

} // namespace thermo
