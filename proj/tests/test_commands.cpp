#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "thermo/commands.hpp"
#include "thermo/csv.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>

using namespace thermo;
using nlohmann::json;

namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("thermo_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json base_config_json() {
  json j;
  j["seed"] = 11;
  j["nature"] = {{"T_h", 305.0}, {"T_c", 295.0}};
  j["model"] = {{"alpha", 6.435235},
                {"beta", 21.912536},
                {"k_coeff", 0.118563},
                {"t_scale", 502.5705},
                {"q_scale", 5.0241597e-4}};
  j["nature"]["noise_std"] = 1.92e-5;
  j["filter"] = {{"kind", "ekf"},
                 {"window_s", 30.0},
                 {"obs_var", 3.6864e-10},
                 {"n_spinup", 150},
                 {"n_measure", 600}};
  return j;
}

// one shared small truth per process; generating it is the slow part
const fs::path& shared_truth(const ExperimentConfig& cfg) {
  static fs::path path;
  if (path.empty()) {
    const fs::path dir = fresh_dir("shared_truth");
    const auto out = cmd_nature(cfg, 30000.0, dir);
    path = out.truth_csv;
  }
  return path;
}

ExperimentConfig base_config() { return config_from_json(base_config_json()); }

int run_cli(const std::string& args) {
  const std::string cmd = std::string(THERMO_CLI_PATH) + " " + args +
                          " > /dev/null 2> /dev/null";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

} // namespace

TEST_CASE("config schema validation") {
  CHECK_NOTHROW(config_from_json(base_config_json()));

  json missing = base_config_json();
  missing["nature"].erase("T_h");
  try {
    config_from_json(missing);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("T_h") != std::string::npos);
  }

  json unknown = base_config_json();
  unknown["nature"]["T_hot"] = 400.0;
  try {
    config_from_json(unknown);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("T_hot") != std::string::npos);
  }

  json badfilter = base_config_json();
  badfilter["filter"]["kind"] = "4dvar";
  CHECK_THROWS_AS(config_from_json(badfilter), ConfigError);

  json nonature = base_config_json();
  nonature.erase("nature");
  CHECK_THROWS_AS(config_from_json(nonature), ConfigError);

  // inflation defaults depend on the window unless given explicitly
  json longwin = base_config_json();
  longwin["filter"]["window_s"] = 600.0;
  const ExperimentConfig c = config_from_json(longwin);
  CHECK(c.filter.config.delta == 0.25);
  CHECK(c.filter.config.mu == 0.25);
}

TEST_CASE("cmd_nature writes the pinned CSV layout deterministically") {
  const ExperimentConfig cfg = base_config();
  const fs::path dir = fresh_dir("nature");
  const auto out = cmd_nature(cfg, 3600.0, dir);
  CHECK(out.samples == 360); // one hour at 10 s
  const std::string first = read_file(out.truth_csv);
  CHECK(first.rfind("t_s,q_kg_s\n", 0) == 0);

  // byte-identical rerun
  const auto again = cmd_nature(cfg, 3600.0, fresh_dir("nature2"));
  CHECK(read_file(again.truth_csv) == first);

  // different seed, different bytes
  ExperimentConfig other = cfg;
  other.seed = 12;
  const auto third = cmd_nature(other, 3600.0, fresh_dir("nature3"));
  CHECK(read_file(third.truth_csv) != first);

  const json meta = json::parse(read_file(out.meta_json));
  CHECK(meta.contains("config_hash"));
  CHECK(meta.contains("tool_version"));
  CHECK(meta["samples"] == 360);
  CHECK(meta["nature"]["T_h"] == 305.0);
}

TEST_CASE("cmd_assimilate produces an analysis CSV and summary") {
  const ExperimentConfig cfg = base_config();
  const fs::path truth = shared_truth(cfg);
  const fs::path dir = fresh_dir("assim");
  const auto out = cmd_assimilate(cfg, truth, dir);
  CHECK(!out.diverged);
  CHECK(out.scaled_bg_rmse < 0.2);
  CHECK(out.scaled_bg_rmse > 0.0);

  const auto records = read_analysis_csv(out.analysis_csv);
  CHECK(records.size() == 750); // spinup + measure
  CHECK(records.front().cycle == 1);
  CHECK(!records.front().bv_growth.has_value());

  const json summary = json::parse(read_file(out.summary_json));
  CHECK(summary["filter"] == "ekf");
  CHECK(summary["diverged"] == false);
  CHECK(summary["scaled_bg_rmse"].get<double>() == out.scaled_bg_rmse);
  CHECK(summary["model_steps_per_cycle"].get<int>() == 6); // 30 s / 5.03 s

  // byte-identical rerun of the primary CSV
  const auto again = cmd_assimilate(cfg, truth, fresh_dir("assim2"));
  CHECK(read_file(again.analysis_csv) == read_file(out.analysis_csv));

  // ensemble filters run through the same driver
  ExperimentConfig ens = cfg;
  ens.filter.config.kind = FilterKind::kEnsrf;
  const auto eout = cmd_assimilate(ens, truth, fresh_dir("assim3"));
  CHECK(!eout.diverged);
  CHECK(eout.scaled_bg_rmse < 0.2);
}

TEST_CASE("cmd_assimilate rejects a truth shorter than the experiment") {
  ExperimentConfig cfg = base_config();
  cfg.filter.config.n_measure = 100000;
  try {
    cmd_assimilate(cfg, shared_truth(base_config()), fresh_dir("short"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("too short") != std::string::npos);
  }
}

TEST_CASE("threedvar needs a static covariance") {
  ExperimentConfig cfg = base_config();
  cfg.filter.config.kind = FilterKind::kThreeDVar;
  CHECK_THROWS_AS(
      cmd_assimilate(cfg, shared_truth(base_config()), fresh_dir("tdv")),
      ConfigError);
}

TEST_CASE("cmd_breed fills the growth column") {
  const ExperimentConfig cfg = base_config();
  const fs::path truth = shared_truth(cfg);
  const fs::path dir = fresh_dir("breed");
  const auto assim = cmd_assimilate(cfg, truth, dir);
  const fs::path bred = cmd_breed(cfg, assim.analysis_csv, dir / "bred.csv");
  const auto records = read_analysis_csv(bred);
  CHECK(!records.front().bv_growth.has_value());
  long with_growth = 0;
  for (size_t i = 1; i < records.size(); ++i)
    with_growth += records[i].bv_growth.has_value();
  CHECK(with_growth == static_cast<long>(records.size()) - 1);
}

TEST_CASE("cmd_sweep runs the cross product and resumes") {
  ExperimentConfig cfg = base_config();
  cfg.filter.config.n_spinup = 100;
  cfg.filter.config.n_measure = 300;
  const fs::path truth = shared_truth(base_config());
  const fs::path dir = fresh_dir("sweep");
  const std::vector<FilterKind> filters{FilterKind::kEkf, FilterKind::kEtkf,
                                        FilterKind::kThreeDVar};
  const std::vector<double> windows{60.0, 30.0}; // intentionally unsorted
  const auto out = cmd_sweep(cfg, filters, windows, truth, dir, 2);
  CHECK(out.cells_run == 6);
  CHECK(out.cells_failed == 0);

  const std::string csv = read_file(out.csv);
  CHECK(csv.rfind("filter,window_s,scaled_bg_rmse\n", 0) == 0);
  // sorted by filter name, then window
  const auto ekf_pos = csv.find("ekf,30");
  const auto ekf60_pos = csv.find("ekf,60");
  const auto etkf_pos = csv.find("etkf,30");
  const auto tdv_pos = csv.find("threedvar,30");
  CHECK(ekf_pos != std::string::npos);
  CHECK(ekf_pos < ekf60_pos);
  CHECK(ekf60_pos < etkf_pos);
  CHECK(etkf_pos < tdv_pos);

  // rerun resumes every completed cell
  const auto again = cmd_sweep(cfg, filters, windows, truth, dir, 2);
  CHECK(again.cells_run == 0);
  CHECK(again.cells_resumed == 6);

  // a config change invalidates the cache
  ExperimentConfig changed = cfg;
  changed.seed = 999;
  // hash comes from the original JSON, so rebuild through json round trip
  json cj = base_config_json();
  cj["seed"] = 999;
  changed = config_from_json(cj);
  changed.filter.config.n_spinup = 100;
  changed.filter.config.n_measure = 300;
  const auto fresh = cmd_sweep(changed, {FilterKind::kEkf}, {30.0}, truth,
                               dir, 1);
  CHECK(fresh.cells_run == 1);
}

TEST_CASE("cmd_reversal emits the combined skill report") {
  ExperimentConfig cfg = base_config();
  cfg.filter.config.n_spinup = 100;
  cfg.filter.config.n_measure = 800;
  const fs::path truth = shared_truth(base_config());
  const fs::path dir = fresh_dir("reversal");
  const auto assim = cmd_assimilate(cfg, truth, dir);
  const fs::path bred = cmd_breed(cfg, assim.analysis_csv, dir / "bred.csv");

  // use the same run as its own training series for the smoke check
  cfg.reversal.training_analysis_csv = bred.string();
  cfg.reversal.training_truth_csv = truth.string();

  const auto out = cmd_reversal(cfg, bred, truth, dir, {});
  const json j = json::parse(read_file(out.json));
  CHECK(j["tests"].contains("lead"));
  CHECK(j["tests"].contains("bv"));
  CHECK(j["tests"].contains("corr"));
  for (const auto& [name, tj] : j["tests"].items()) {
    const auto& c = tj["contingency"];
    const long n = c["n"].get<long>();
    CHECK(c["hits"].get<long>() + c["false_alarms"].get<long>() +
              c["misses"].get<long>() + c["correct_negatives"].get<long>() ==
          n);
  }
  CHECK(j["truth_reversals"].get<long>() > 0);

  // subset flag drops the other tests
  const auto sub = cmd_reversal(cfg, bred, truth, fresh_dir("rev2"),
                                {"lead", "corr"});
  const json js = json::parse(read_file(sub.json));
  CHECK(js["tests"].contains("lead"));
  CHECK(js["tests"].contains("corr"));
  CHECK(!js["tests"].contains("bv"));

  CHECK_THROWS_AS(
      cmd_reversal(cfg, bred, truth, fresh_dir("rev3"), {"nonsense"}),
      ConfigError);

  // the verify renderer consumes the skill JSON
  const std::string table = cmd_verify(out.json);
  CHECK(table.find("lead") != std::string::npos);
  CHECK(table.find("TS") != std::string::npos);
}

TEST_CASE("cmd_reversal detects misaligned series") {
  ExperimentConfig cfg = base_config();
  cfg.filter.config.n_spinup = 100;
  cfg.filter.config.n_measure = 300;
  const fs::path truth = shared_truth(base_config());
  const fs::path dir = fresh_dir("misalign");
  const auto assim = cmd_assimilate(cfg, truth, dir);

  // a truth from a different seed no longer matches the embedded q_truth
  ExperimentConfig other = base_config();
  other.seed = 12345;
  const auto wrong = cmd_nature(other, 30000.0, fresh_dir("misalign_truth"));
  CHECK_THROWS_AS(
      cmd_reversal(cfg, assim.analysis_csv, wrong.truth_csv, dir, {"lead"}),
      ConfigError);
}

TEST_CASE("cmd_calibrate writes a result JSON") {
  ExperimentConfig cfg = base_config();
  json cj = base_config_json();
  cj["calibration"] = {{"max_iter", 60},
                       {"guess",
                        {{"alpha", 6.4},
                         {"beta", 22.0},
                         {"k_coeff", 0.12},
                         {"t_scale", 502.0},
                         {"q_scale", 5.0e-4}}}};
  cfg = config_from_json(cj);
  const fs::path truth = shared_truth(base_config());
  const auto path = cmd_calibrate(cfg, truth, fresh_dir("cal"));
  const json j = json::parse(read_file(path));
  CHECK(j.contains("params"));
  CHECK(j["params"]["alpha"].get<double>() > 0.0);
  CHECK(j.contains("residual_norm"));
  CHECK(j["n_windows"].get<int>() > 10);
}

TEST_CASE("environment variable overrides the output root") {
  const ExperimentConfig cfg = base_config();
  const fs::path root = fresh_dir("envroot");
  setenv("THERMO_OUTPUT_ROOT", root.c_str(), 1);
  const fs::path resolved = resolve_output_dir(cfg);
  unsetenv("THERMO_OUTPUT_ROOT");
  CHECK(resolved == root / "out");
  CHECK(resolve_output_dir(cfg) == fs::path("out"));
}

TEST_CASE("cli exit codes") {
  const fs::path dir = fresh_dir("cli");

  // config with a missing required key -> 2
  {
    std::ofstream f(dir / "bad.json");
    f << R"({"nature": {"T_c": 295.0}})";
  }
  CHECK(run_cli("-c " + (dir / "bad.json").string() + " nature --duration 100 -o " +
                (dir / "o1").string()) == 2);

  // well-formed config
  {
    std::ofstream f(dir / "ok.json");
    f << base_config_json().dump(2);
  }
  CHECK(run_cli("-c " + (dir / "ok.json").string() +
                " nature --duration 600 -o " + (dir / "o2").string()) == 0);

  // unknown filter kind -> 2
  CHECK(run_cli("-c " + (dir / "ok.json").string() + " assimilate --truth " +
                (dir / "o2/truth.csv").string() + " --filter nonsense -o " +
                (dir / "o3").string()) == 2);

  // runtime failure (missing truth file) -> 1
  CHECK(run_cli("-c " + (dir / "ok.json").string() + " assimilate --truth " +
                (dir / "missing.csv").string() + " -o " +
                (dir / "o4").string()) == 1);
}
