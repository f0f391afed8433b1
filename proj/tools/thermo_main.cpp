// Command-line front end for the thermosyphon forecasting pipeline.

#include "thermo/commands.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

thermo::ExperimentConfig load_or_exit(const std::string& path) {
  return thermo::load_config(path);
}

std::vector<thermo::FilterKind> parse_filters(const std::string& csv) {
  std::vector<thermo::FilterKind> out;
  std::string cur;
  auto flush = [&]() {
    if (!cur.empty()) {
      out.push_back(thermo::filter_kind_from_string(cur));
      cur.clear();
    }
  };
  for (char c : csv) {
    if (c == ',') flush();
    else cur += c;
  }
  flush();
  if (out.empty()) throw thermo::ConfigError("no filters given");
  return out;
}

std::vector<std::string> parse_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : csv) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thermosyphon truth simulation, assimilation, and flow "
               "reversal forecasting"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("-c,--config", config_path, "experiment config JSON")
      ->required();

  // nature
  auto* nature = app.add_subcommand("nature", "simulate the truth series");
  double duration = 86400.0;
  std::string out_dir = "";
  nature->add_option("--duration", duration, "recorded duration, seconds");
  nature->add_option("-o,--out", out_dir, "output directory");

  // assimilate
  auto* assim = app.add_subcommand("assimilate", "run one filter experiment");
  std::string truth_path;
  std::string filter_name;
  double window = 0.0;
  assim->add_option("--truth", truth_path, "truth CSV")->required();
  assim->add_option("--filter", filter_name, "filter kind override");
  assim->add_option("--window", window, "assimilation window override, s");
  assim->add_option("-o,--out", out_dir, "output directory");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "filter x window cross product");
  std::string filters_csv = "threedvar,ekf,ensrf,etkf";
  std::string windows_csv;
  int jobs = 0;
  sweep->add_option("--truth", truth_path, "truth CSV")->required();
  sweep->add_option("--filters", filters_csv, "comma-separated filter kinds");
  sweep->add_option("--windows", windows_csv,
                    "comma-separated windows in seconds (default 30..600 "
                    "step 30)");
  sweep->add_option("--jobs", jobs, "worker threads (default: cores)");
  sweep->add_option("-o,--out", out_dir, "output directory");

  // breed
  auto* breed = app.add_subcommand("breed", "fill the bred-vector column");
  std::string analysis_path, out_csv;
  breed->add_option("--analysis", analysis_path, "analysis CSV")->required();
  breed->add_option("-o,--out", out_csv, "output CSV path")->required();

  // reversal
  auto* rev = app.add_subcommand("reversal", "reversal + residency forecasts");
  std::string tests_csv;
  rev->add_option("--analysis", analysis_path, "analysis CSV")->required();
  rev->add_option("--truth", truth_path, "truth CSV")->required();
  rev->add_option("--tests", tests_csv, "subset, e.g. lead,corr");
  rev->add_option("-o,--out", out_dir, "output directory");

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "fit model parameters");
  cal->add_option("--truth", truth_path, "truth CSV")->required();
  cal->add_option("-o,--out", out_dir, "output directory");

  // verify
  auto* verify = app.add_subcommand("verify", "render the score table");
  std::string skill_path;
  verify->add_option("--skill", skill_path, "reversal skill JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    thermo::ExperimentConfig cfg = load_or_exit(config_path);
    const std::filesystem::path out =
        out_dir.empty() ? thermo::resolve_output_dir(cfg)
                        : std::filesystem::path(out_dir);

    if (nature->parsed()) {
      const auto res = thermo::cmd_nature(cfg, duration, out);
      std::printf("wrote %s (%ld samples, climatology %.6g kg/s)\n",
                  res.truth_csv.c_str(), res.samples, res.climatology);
    } else if (assim->parsed()) {
      if (!filter_name.empty())
        cfg.filter.config.kind = thermo::filter_kind_from_string(filter_name);
      if (window > 0.0) {
        cfg.filter.config.window_s = window;
        if (!cfg.filter.delta_explicit || !cfg.filter.mu_explicit) {
          double delta, mu;
          thermo::default_inflation(cfg.filter.config.kind, window, delta, mu);
          if (!cfg.filter.delta_explicit) cfg.filter.config.delta = delta;
          if (!cfg.filter.mu_explicit) cfg.filter.config.mu = mu;
        }
      }
      const auto res = thermo::cmd_assimilate(cfg, truth_path, out);
      std::printf("scaled background RMSE %.6g%s -> %s\n", res.scaled_bg_rmse,
                  res.diverged ? " (diverged)" : "",
                  res.summary_json.c_str());
      if (res.diverged) return 1;
    } else if (sweep->parsed()) {
      std::vector<double> windows;
      if (windows_csv.empty()) {
        for (int w = 30; w <= 600; w += 30) windows.push_back(w);
      } else {
        for (const std::string& s : parse_list(windows_csv))
          windows.push_back(std::stod(s));
      }
      const auto res = thermo::cmd_sweep(cfg, parse_filters(filters_csv),
                                         windows, truth_path, out, jobs);
      std::printf("sweep: %d run, %d resumed, %d failed -> %s\n",
                  res.cells_run, res.cells_resumed, res.cells_failed,
                  res.csv.c_str());
      if (res.cells_failed > 0) return 1;
    } else if (breed->parsed()) {
      const auto path = thermo::cmd_breed(cfg, analysis_path, out_csv);
      std::printf("wrote %s\n", path.c_str());
    } else if (rev->parsed()) {
      const auto res = thermo::cmd_reversal(cfg, analysis_path, truth_path,
                                            out, parse_list(tests_csv));
      std::printf("wrote %s\n", res.json.c_str());
    } else if (cal->parsed()) {
      const auto path = thermo::cmd_calibrate(cfg, truth_path, out);
      std::printf("wrote %s\n", path.c_str());
    } else if (verify->parsed()) {
      std::cout << thermo::cmd_verify(skill_path);
    }
    return 0;
  } catch (const thermo::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
