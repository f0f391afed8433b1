#include "thermo/commands.hpp"

#include "thermo/breeding.hpp"
#include "thermo/csv.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

namespace thermo {

using nlohmann::json;

namespace {

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir.string());
}

json metadata_block(const ExperimentConfig& cfg) {
  return {{"config_hash", cfg.config_hash}, {"tool_version", tool_version()}};
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

json read_json(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  json j;
  f >> j;
  return j;
}

void note_window_mapping(const ExperimentConfig& cfg, double window_s) {
  const double step_s = cfg.model.t_scale * kModelStep;
  const int steps = window_model_steps(window_s, cfg.model);
  if (std::abs(steps * step_s - window_s) > 1e-9) {
    std::fprintf(stderr,
                 "note: window %.3f s maps to %d model steps (%.3f s)\n",
                 window_s, steps, steps * step_s);
  }
}

/// Observations locked to the truth series; the stream label keeps them
/// independent of any filter-side randomness.
std::vector<double> synthesize_observations(const ExperimentConfig& cfg,
                                            const TruthCsv& truth) {
  TruthSeries s;
  s.q = truth.q;
  s.times = truth.times;
  return observe(s, cfg.nature.noise_std, cfg.seed);
}

ExperimentResult run_from_csv(const ExperimentConfig& cfg,
                              const TruthCsv& truth,
                              const FilterConfig& fcfg) {
  const std::vector<double> y = synthesize_observations(cfg, truth);
  const double report = truth.times.size() > 1
                            ? truth.times[1] - truth.times[0]
                            : cfg.nature.loop.report_interval;
  try {
    return run_experiment(truth.q, y, report, fcfg, cfg.model);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

} // namespace

NatureOutputs cmd_nature(const ExperimentConfig& cfg, double duration_s,
                         const std::filesystem::path& out_dir) {
  if (!(duration_s >= cfg.nature.loop.report_interval))
    throw ConfigError("nature duration must cover at least one report interval");
  ensure_dir(out_dir);
  const LoopState ic = default_initial_state(cfg.nature.loop);
  const TruthSeries series = simulate_truth(cfg.nature.loop, duration_s, ic,
                                            cfg.nature.transient_s, cfg.seed);
  NatureOutputs out;
  out.truth_csv = out_dir / "truth.csv";
  out.meta_json = out_dir / "truth.json";
  out.samples = static_cast<long>(series.q.size());
  out.climatology = climatology(series.q);
  write_truth_csv(out.truth_csv, series);

  json meta = metadata_block(cfg);
  meta["seed"] = cfg.seed;
  meta["duration_s"] = duration_s;
  meta["samples"] = out.samples;
  meta["climatology_kg_s"] = out.climatology;
  meta["nature"] = config_to_json(cfg)["nature"];
  write_json(out.meta_json, meta);
  return out;
}

AssimilateOutputs cmd_assimilate(const ExperimentConfig& cfg,
                                 const std::filesystem::path& truth_csv,
                                 const std::filesystem::path& out_dir) {
  ensure_dir(out_dir);
  const TruthCsv truth = read_truth_csv(truth_csv);
  FilterConfig fcfg = cfg.filter.config;
  if (fcfg.kind == FilterKind::kThreeDVar && fcfg.b_static.size() != 9)
    throw ConfigError(
        "threedvar requires filter.b_static (estimate it via the sweep or "
        "provide it in the config)");
  note_window_mapping(cfg, fcfg.window_s);

  const ExperimentResult res = run_from_csv(cfg, truth, fcfg);

  AssimilateOutputs out;
  out.analysis_csv = out_dir / "analysis.csv";
  out.summary_json = out_dir / "summary.json";
  out.scaled_bg_rmse = res.scaled_bg_rmse;
  out.diverged = res.diverged;
  write_analysis_csv(out.analysis_csv, res.records);

  json summary = metadata_block(cfg);
  summary["filter"] = to_string(fcfg.kind);
  summary["window_s"] = fcfg.window_s;
  summary["delta"] = fcfg.delta;
  summary["mu"] = fcfg.mu;
  summary["scaled_bg_rmse"] = res.scaled_bg_rmse;
  summary["diverged"] = res.diverged;
  if (res.diverged) summary["divergence_cycle"] = res.divergence_cycle;
  summary["model_steps_per_cycle"] = res.model_steps_per_cycle;
  summary["samples_per_cycle"] = res.samples_per_cycle;
  summary["truth_climatology"] = res.truth_climatology;
  write_json(out.summary_json, summary);
  return out;
}

namespace {

struct SweepCell {
  FilterKind kind;
  double window_s = 0.0;
  std::filesystem::path file;
  double rmse = std::numeric_limits<double>::quiet_NaN();
  bool diverged = false;
  bool done = false;
  bool failed = false;
  std::string error;
};

std::filesystem::path cell_path(const std::filesystem::path& dir,
                                FilterKind kind, double window_s) {
  char name[64];
  std::snprintf(name, sizeof(name), "%s_%04.0fs.json",
                to_string(kind).c_str(), window_s);
  return dir / name;
}

} // namespace

SweepOutputs cmd_sweep(const ExperimentConfig& cfg,
                       const std::vector<FilterKind>& filters,
                       const std::vector<double>& windows_s,
                       const std::filesystem::path& truth_csv,
                       const std::filesystem::path& out_dir, int jobs) {
  if (filters.empty() || windows_s.empty())
    throw ConfigError("sweep needs at least one filter and one window");
  ensure_dir(out_dir);
  const std::filesystem::path cells_dir = out_dir / "sweep";
  ensure_dir(cells_dir);
  const TruthCsv truth = read_truth_csv(truth_csv);

  SweepOutputs out;
  out.csv = out_dir / "sweep.csv";
  std::vector<double> windows = windows_s;
  std::sort(windows.begin(), windows.end());

  std::vector<SweepCell> cells;
  for (FilterKind kind : filters)
    for (double w : windows) {
      SweepCell c;
      c.kind = kind;
      c.window_s = w;
      c.file = cell_path(cells_dir, kind, w);
      cells.push_back(c);
    }

  std::mutex mtx;
  auto try_resume = [&](SweepCell& c) {
    if (!std::filesystem::exists(c.file)) return false;
    try {
      const json j = read_json(c.file);
      if (j.at("config_hash").get<std::string>() != cfg.config_hash)
        return false;
      c.rmse = j.at("scaled_bg_rmse").get<double>();
      c.diverged = j.at("diverged").get<bool>();
      c.done = true;
      return true;
    } catch (const std::exception&) {
      return false;
    }
  };

  auto filter_config_for = [&](FilterKind kind, double w) {
    FilterConfig fc = cfg.filter.config;
    fc.kind = kind;
    fc.window_s = w;
    if (!cfg.filter.delta_explicit || !cfg.filter.mu_explicit) {
      double delta, mu;
      default_inflation(kind, w, delta, mu);
      if (!cfg.filter.delta_explicit) fc.delta = delta;
      if (!cfg.filter.mu_explicit) fc.mu = mu;
    }
    return fc;
  };

  auto write_cell = [&](const SweepCell& c, const json& extra) {
    json j = metadata_block(cfg);
    j["filter"] = to_string(c.kind);
    j["window_s"] = c.window_s;
    j["scaled_bg_rmse"] = c.rmse;
    j["diverged"] = c.diverged;
    for (const auto& [k, v] : extra.items()) j[k] = v;
    write_json(c.file, j);
  };

  auto run_plain_cell = [&](SweepCell& c) {
    if (try_resume(c)) {
      std::lock_guard<std::mutex> lock(mtx);
      ++out.cells_resumed;
      return;
    }
    try {
      const ExperimentResult res =
          run_from_csv(cfg, truth, filter_config_for(c.kind, c.window_s));
      c.rmse = res.scaled_bg_rmse;
      c.diverged = res.diverged;
      c.done = true;
      write_cell(c, json::object());
      std::lock_guard<std::mutex> lock(mtx);
      ++out.cells_run;
    } catch (const std::exception& e) {
      c.failed = true;
      c.error = e.what();
      std::lock_guard<std::mutex> lock(mtx);
      ++out.cells_failed;
      std::fprintf(stderr, "sweep cell %s %.0f s failed: %s\n",
                   to_string(c.kind).c_str(), c.window_s, e.what());
    }
  };

  // The static-B chain is sequential in window order; everything else is
  // independent.
  std::vector<SweepCell*> plain;
  std::vector<SweepCell*> chain;
  for (SweepCell& c : cells)
    (c.kind == FilterKind::kThreeDVar ? chain : plain).push_back(&c);

  auto run_chain = [&]() {
    Eigen::Matrix3d b = 0.1 * Eigen::Matrix3d::Identity();
    bool have_b = false;
    for (SweepCell* c : chain) {
      if (try_resume(*c)) {
        // reuse the stored covariance so later windows bootstrap correctly
        try {
          const json j = read_json(c->file);
          const auto& bj = j.at("b_static");
          for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k) b(i, k) = bj[i][k].get<double>();
          have_b = true;
        } catch (const std::exception&) {
        }
        std::lock_guard<std::mutex> lock(mtx);
        ++out.cells_resumed;
        continue;
      }
      try {
        FilterConfig fc = filter_config_for(c->kind, c->window_s);
        const std::vector<double> y = synthesize_observations(cfg, truth);
        const double report = truth.times[1] - truth.times[0];
        const BEstimate est = threedvar_estimate_B(
            truth.q, y, report, fc, cfg.model,
            have_b ? b : Eigen::Matrix3d(0.1 * Eigen::Matrix3d::Identity()));
        b = est.b;
        have_b = true;
        fc.b_static = est.b;
        const ExperimentResult res = run_from_csv(cfg, truth, fc);
        c->rmse = res.scaled_bg_rmse;
        c->diverged = res.diverged;
        c->done = true;
        json extra;
        extra["b_iterations"] = est.iterations;
        extra["b_converged"] = est.converged;
        json bj = json::array();
        for (int i = 0; i < 3; ++i)
          bj.push_back({est.b(i, 0), est.b(i, 1), est.b(i, 2)});
        extra["b_static"] = bj;
        write_cell(*c, extra);
        std::lock_guard<std::mutex> lock(mtx);
        ++out.cells_run;
      } catch (const std::exception& e) {
        c->failed = true;
        c->error = e.what();
        std::lock_guard<std::mutex> lock(mtx);
        ++out.cells_failed;
        std::fprintf(stderr, "sweep cell threedvar %.0f s failed: %s\n",
                     c->window_s, e.what());
      }
    }
  };

  if (jobs < 1) jobs = static_cast<int>(std::thread::hardware_concurrency());
  if (jobs < 1) jobs = 1;
  std::atomic<size_t> next{0};
  std::vector<std::thread> workers;
  const int plain_workers = std::max(1, jobs - (chain.empty() ? 0 : 1));
  for (int t = 0; t < plain_workers; ++t)
    workers.emplace_back([&]() {
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= plain.size()) break;
        run_plain_cell(*plain[i]);
      }
    });
  if (!chain.empty()) workers.emplace_back(run_chain);
  for (std::thread& w : workers) w.join();

  // aggregated plot-ready CSV, filter then window
  std::vector<std::tuple<std::string, double, double>> rows;
  for (const SweepCell& c : cells)
    if (c.done) rows.emplace_back(to_string(c.kind), c.window_s, c.rmse);
  std::sort(rows.begin(), rows.end());
  write_sweep_csv(out.csv, rows);
  return out;
}

std::filesystem::path cmd_breed(const ExperimentConfig& cfg,
                                const std::filesystem::path& analysis_csv,
                                const std::filesystem::path& out_csv) {
  std::vector<AnalysisRecord> records = read_analysis_csv(analysis_csv);
  if (records.empty()) throw ConfigError("analysis CSV has no records");
  std::vector<Eigen::Vector3d> states;
  states.reserve(records.size());
  for (const auto& r : records) states.push_back(r.x_analysis);
  const int steps = window_model_steps(cfg.filter.config.window_s, cfg.model);
  const auto growth =
      growth_series(states, cfg.model, steps, cfg.reversal.rescale_amplitude);
  for (size_t i = 0; i < records.size(); ++i) records[i].bv_growth = growth[i];
  if (out_csv.has_parent_path()) ensure_dir(out_csv.parent_path());
  write_analysis_csv(out_csv, records);
  return out_csv;
}

namespace {

struct AlignedSeries {
  std::vector<Eigen::Vector3d> analyses;
  std::vector<double> x1;
  std::vector<double> x2;
  std::vector<double> q_truth;
  std::vector<std::optional<double>> growth;
  double window_s = 0.0;
};

AlignedSeries align_with_truth(const std::vector<AnalysisRecord>& records,
                               const TruthCsv& truth) {
  AlignedSeries s;
  if (records.size() < 2) throw ConfigError("analysis series too short");
  const double report = truth.times[1] - truth.times[0];
  s.window_s = records[1].t_s - records[0].t_s;
  for (const auto& r : records) {
    const double pos = (r.t_s - truth.times[0]) / report;
    const long idx = std::lround(pos);
    if (idx < 0 || idx >= static_cast<long>(truth.q.size()) ||
        std::abs(pos - idx) > 1e-6)
      throw ConfigError(
          "analysis and truth series are misaligned (cycle times do not fall "
          "on truth samples)");
    if (std::abs(truth.q[idx] - r.q_truth) >
        1e-9 * std::max(1.0, std::abs(r.q_truth)))
      throw ConfigError(
          "analysis and truth series are misaligned (q_truth mismatch at t=" +
          std::to_string(r.t_s) + " s)");
    s.analyses.push_back(r.x_analysis);
    s.x1.push_back(r.x_analysis[0]);
    s.x2.push_back(r.x_analysis[1]);
    s.q_truth.push_back(r.q_truth);
    s.growth.push_back(r.bv_growth);
  }
  return s;
}

std::vector<long> event_indices(const std::vector<double>& q) {
  std::vector<long> idx;
  for (const ReversalEvent& e : detect_truth_reversals(q)) idx.push_back(e.index);
  return idx;
}

} // namespace

ReversalOutputs cmd_reversal(const ExperimentConfig& cfg,
                             const std::filesystem::path& analysis_csv,
                             const std::filesystem::path& truth_csv,
                             const std::filesystem::path& out_dir,
                             const std::vector<std::string>& tests) {
  ensure_dir(out_dir);
  const std::vector<AnalysisRecord> records = read_analysis_csv(analysis_csv);
  const TruthCsv truth = read_truth_csv(truth_csv);
  AlignedSeries series = align_with_truth(records, truth);
  const ReversalThresholds& th = cfg.reversal.thresholds;
  const int steps = window_model_steps(series.window_s, cfg.model);
  const long n = static_cast<long>(series.analyses.size());

  std::vector<std::string> wanted = tests;
  if (wanted.empty()) wanted = {"lead", "bv", "corr"};
  for (const std::string& t : wanted)
    if (t != "lead" && t != "bv" && t != "corr")
      throw ConfigError("unknown reversal test '" + t + "'");
  auto enabled = [&wanted](const char* t) {
    return std::find(wanted.begin(), wanted.end(), t) != wanted.end();
  };

  const std::vector<long> events = event_indices(series.q_truth);

  // training table
  AmplitudeResidencyTable table;
  bool have_training = false;
  if (!cfg.reversal.training_analysis_csv.empty() &&
      !cfg.reversal.training_truth_csv.empty()) {
    const auto train_records =
        read_analysis_csv(cfg.reversal.training_analysis_csv);
    const TruthCsv train_truth = read_truth_csv(cfg.reversal.training_truth_csv);
    AlignedSeries train = align_with_truth(train_records, train_truth);
    table = build_residency_table(train.x1, event_indices(train.q_truth),
                                  train.window_s);
    have_training = true;
  } else {
    std::fprintf(stderr,
                 "warning: no training series configured; residency forecasts "
                 "fall back to climatology-only\n");
  }

  json out_tests = json::object();
  for (const std::string& name : wanted) {
    std::vector<bool> trig(n, false);
    long first_cycle = 0;
    long degenerate_corr = 0;
    if (name == "lead") {
      for (long k = 0; k < n; ++k)
        trig[k] = lead_test(series.analyses[k], cfg.model, th.lambda_lead, steps);
    } else if (name == "bv") {
      std::vector<std::optional<double>> growth = series.growth;
      const bool have_growth =
          std::any_of(growth.begin(), growth.end(),
                      [](const auto& g) { return g.has_value(); });
      if (!have_growth)
        growth = growth_series(series.analyses, cfg.model, steps,
                               cfg.reversal.rescale_amplitude);
      first_cycle = 1;
      for (long k = 1; k < n; ++k)
        if (growth[k]) trig[k] = bv_test(*growth[k], th.rho_bv);
    } else {
      first_cycle = th.lambda_corr - 1;
      std::vector<double> h1, h2;
      for (long k = first_cycle; k < n; ++k) {
        h1.assign(series.x1.begin(), series.x1.begin() + k + 1);
        h2.assign(series.x2.begin(), series.x2.begin() + k + 1);
        const CorrResult r = corr_test(h1, h2, th.lambda_corr, th.rho_corr);
        trig[k] = r.triggered;
        if (r.degenerate) ++degenerate_corr;
      }
    }

    const LabelledOutcomes outcome =
        label_outcomes(trig, events, th.horizon, first_cycle);
    const WarningTimes warn = warning_times(outcome, series.window_s);

    // residency forecasts for hits
    std::vector<double> rps_forecast, rps_clim;
    json residency_log = json::array();
    const ResidencyForecast clim_forecast = table.climatology();
    for (const auto& [event, trigger_cycle] : outcome.first_trigger) {
      auto next = std::upper_bound(events.begin(), events.end(), event);
      if (next == events.end()) continue; // residency unresolved at series end
      const double residency_min = (*next - event) * series.window_s / 60.0;
      const int realized = residency_category(residency_min);
      const double amp = trigger_amplitude(series.analyses, trigger_cycle,
                                           cfg.model, th.lambda_lead, steps);
      const ResidencyForecastResult fc = residency_forecast(amp, table);
      const double score_f = rps(fc.probabilities, realized);
      const double score_c = rps(clim_forecast, realized);
      rps_forecast.push_back(score_f);
      rps_clim.push_back(score_c);
      json entry;
      entry["event_cycle"] = event;
      entry["trigger_cycle"] = trigger_cycle;
      entry["x1_max"] = amp;
      entry["forecast"] = fc.probabilities;
      entry["used_climatology"] = fc.used_climatology;
      entry["realized_category"] = realized;
      entry["residency_minutes"] = residency_min;
      entry["rps"] = score_f;
      entry["rps_climatology"] = score_c;
      residency_log.push_back(entry);
    }

    SkillReport rep;
    rep.table = outcome.table;
    rep.categorical = categorical_scores(outcome.table);
    if (!rps_forecast.empty()) {
      rep.rps_avg = rps_skill(rps_forecast, rps_clim, Aggregate::kMean);
      rep.rps_med = rps_skill(rps_forecast, rps_clim, Aggregate::kMedian);
    }

    json tj;
    tj["contingency"] = {{"hits", rep.table.hits},
                         {"false_alarms", rep.table.false_alarms},
                         {"misses", rep.table.misses},
                         {"correct_negatives", rep.table.correct_negatives},
                         {"n", rep.table.total()}};
    json scores;
    if (rep.categorical.ts) scores["ts"] = *rep.categorical.ts;
    if (rep.categorical.far) scores["far"] = *rep.categorical.far;
    if (rep.categorical.pod) scores["pod"] = *rep.categorical.pod;
    if (rep.rps_avg) scores["rps_avg"] = *rep.rps_avg;
    if (rep.rps_med) scores["rps_med"] = *rep.rps_med;
    tj["scores"] = scores;
    json hist = json::object();
    for (const auto& [cycles, count] : warn.histogram)
      hist[std::to_string(cycles)] = count;
    tj["warning_times"] = {{"mean_s", warn.mean_s},
                           {"median_s", warn.median_s},
                           {"count", warn.seconds.size()},
                           {"histogram_cycles", hist}};
    tj["residency_log"] = residency_log;
    if (name == "corr") tj["degenerate_fits"] = degenerate_corr;
    out_tests[name] = tj;
  }

  json out = metadata_block(cfg);
  out["window_s"] = series.window_s;
  out["cycles"] = n;
  out["truth_reversals"] = events.size();
  out["thresholds"] = {{"rho_corr", th.rho_corr},
                       {"lambda_corr", th.lambda_corr},
                       {"rho_bv", th.rho_bv},
                       {"lambda_lead", th.lambda_lead},
                       {"horizon", th.horizon}};
  out["training_table"] = {{"rows", table.rows.size()},
                           {"clamped", table.clamped_count},
                           {"from_training_series", have_training}};
  out["tests"] = out_tests;

  ReversalOutputs res;
  res.json = out_dir / "reversal.json";
  write_json(res.json, out);
  return res;
}

std::filesystem::path cmd_calibrate(const ExperimentConfig& cfg,
                                    const std::filesystem::path& truth_csv,
                                    const std::filesystem::path& out_dir) {
  ensure_dir(out_dir);
  const TruthCsv truth = read_truth_csv(truth_csv);
  ShootingProblem problem;
  problem.times = truth.times;
  problem.q = truth.q;
  problem.window_samples = cfg.calibration.window_samples;
  problem.continuity_weight = cfg.calibration.continuity_weight;
  const CalibrationResult res =
      calibrate(problem, cfg.calibration.guess, cfg.calibration.max_iter);

  json j = metadata_block(cfg);
  j["params"] = {{"alpha", res.params.alpha},
                 {"beta", res.params.beta},
                 {"k_coeff", res.params.k_coeff},
                 {"t_scale", res.params.t_scale},
                 {"q_scale", res.params.q_scale}};
  j["residual_norm"] = res.residual_norm;
  j["continuity_gap_norm"] = res.continuity_gap_norm;
  j["converged"] = res.converged;
  j["iterations"] = res.iterations;
  j["blowup_flagged"] = res.blowup_flagged;
  j["n_windows"] = res.window_ics.size();
  json ics = json::array();
  for (const auto& ic : res.window_ics) ics.push_back({ic[0], ic[1], ic[2]});
  j["window_ics"] = ics;

  const std::filesystem::path path = out_dir / "calibration.json";
  write_json(path, j);
  return path;
}

std::string cmd_verify(const std::filesystem::path& skill_json) {
  const json j = read_json(skill_json);
  if (!j.contains("tests"))
    throw ConfigError("skill JSON has no 'tests' section: " +
                      skill_json.string());
  std::vector<std::pair<std::string, SkillReport>> rows;
  for (const auto& [name, tj] : j.at("tests").items()) {
    SkillReport rep;
    const auto& c = tj.at("contingency");
    rep.table.hits = c.at("hits").get<long>();
    rep.table.false_alarms = c.at("false_alarms").get<long>();
    rep.table.misses = c.at("misses").get<long>();
    rep.table.correct_negatives = c.at("correct_negatives").get<long>();
    rep.categorical = categorical_scores(rep.table);
    const auto& s = tj.at("scores");
    if (s.contains("rps_avg")) rep.rps_avg = s.at("rps_avg").get<double>();
    if (s.contains("rps_med")) rep.rps_med = s.at("rps_med").get<double>();
    rows.emplace_back(name, rep);
  }
  std::sort(rows.begin(), rows.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return render_skill_table(rows);
}

} // namespace thermo
