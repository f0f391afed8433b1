#include "thermo/experiment_config.hpp"

#include "thermo/rng.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>

namespace thermo {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& j, const std::string& path,
                         const std::set<std::string>& allowed) {
  if (!j.is_object())
    throw ConfigError("config node '" + path + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key))
      throw ConfigError("unknown config key '" + path + key + "'");
  }
}

template <class T>
T get_or(const json& j, const std::string& path, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + path + key + "' has the wrong type");
  }
}

double require_number(const json& j, const std::string& path, const char* key) {
  if (!j.contains(key))
    throw ConfigError("missing required config key '" + path + key + "'");
  if (!j.at(key).is_number())
    throw ConfigError("config key '" + path + key + "' must be a number");
  return j.at(key).get<double>();
}

NatureSettings parse_nature(const json& j) {
  reject_unknown_keys(j, "nature.",
                      {"R", "r", "T_h", "T_c", "g", "gamma", "nu", "kappa",
                       "rho0", "c_p", "h_w0", "f_w0", "k_coeff_true", "c_quad",
                       "kappa_axial", "n_cells", "dt_sim", "report_interval",
                       "slab_geometry", "noise_std", "transient_s"});
  NatureSettings n;
  LoopConfig d; // defaults
  n.loop.T_h = require_number(j, "nature.", "T_h");
  n.loop.T_c = require_number(j, "nature.", "T_c");
  n.loop.R = get_or(j, "nature.", "R", d.R);
  n.loop.r = get_or(j, "nature.", "r", d.r);
  n.loop.g = get_or(j, "nature.", "g", d.g);
  n.loop.gamma = get_or(j, "nature.", "gamma", d.gamma);
  n.loop.nu = get_or(j, "nature.", "nu", d.nu);
  n.loop.kappa = get_or(j, "nature.", "kappa", d.kappa);
  n.loop.rho0 = get_or(j, "nature.", "rho0", d.rho0);
  n.loop.c_p = get_or(j, "nature.", "c_p", d.c_p);
  n.loop.h_w0 = get_or(j, "nature.", "h_w0", d.h_w0);
  n.loop.f_w0 = get_or(j, "nature.", "f_w0", d.f_w0);
  n.loop.k_coeff_true = get_or(j, "nature.", "k_coeff_true", d.k_coeff_true);
  n.loop.c_quad = get_or(j, "nature.", "c_quad", d.c_quad);
  n.loop.kappa_axial = get_or(j, "nature.", "kappa_axial", d.kappa_axial);
  n.loop.n_cells = get_or(j, "nature.", "n_cells", d.n_cells);
  n.loop.dt_sim = get_or(j, "nature.", "dt_sim", d.dt_sim);
  n.loop.report_interval =
      get_or(j, "nature.", "report_interval", d.report_interval);
  n.loop.slab_geometry = get_or(j, "nature.", "slab_geometry", false);
  n.noise_std = get_or(j, "nature.", "noise_std", n.noise_std);
  n.transient_s = get_or(j, "nature.", "transient_s", n.transient_s);
  try {
    n.loop.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid nature config: ") + e.what());
  }
  if (n.noise_std < 0) throw ConfigError("nature.noise_std must be >= 0");
  return n;
}

EmParams parse_model(const json& j, const std::string& path) {
  reject_unknown_keys(j, path,
                      {"alpha", "beta", "k_coeff", "t_scale", "q_scale"});
  EmParams m;
  m.alpha = get_or(j, path, "alpha", m.alpha);
  m.beta = get_or(j, path, "beta", m.beta);
  m.k_coeff = get_or(j, path, "k_coeff", m.k_coeff);
  m.t_scale = get_or(j, path, "t_scale", m.t_scale);
  m.q_scale = get_or(j, path, "q_scale", m.q_scale);
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid model config: ") + e.what());
  }
  return m;
}

FilterSettings parse_filter(const json& j) {
  reject_unknown_keys(j, "filter.",
                      {"kind", "window_s", "delta", "mu", "obs_var",
                       "ensemble_size", "n_spinup", "n_measure", "init_spread",
                       "b_static", "seed"});
  FilterSettings f;
  const std::string kind = get_or<std::string>(j, "filter.", "kind", "ekf");
  try {
    f.config.kind = filter_kind_from_string(kind);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  f.config.window_s = get_or(j, "filter.", "window_s", f.config.window_s);
  if (!(f.config.window_s > 0)) throw ConfigError("filter.window_s must be > 0");
  default_inflation(f.config.kind, f.config.window_s, f.config.delta,
                    f.config.mu);
  if (j.contains("delta")) {
    f.config.delta = require_number(j, "filter.", "delta");
    f.delta_explicit = true;
  }
  if (j.contains("mu")) {
    f.config.mu = require_number(j, "filter.", "mu");
    f.mu_explicit = true;
  }
  if (f.config.delta < 0 || f.config.mu < 0)
    throw ConfigError("filter inflation values must be >= 0");
  f.config.obs_var = get_or(j, "filter.", "obs_var", f.config.obs_var);
  f.config.ensemble_size =
      get_or(j, "filter.", "ensemble_size", f.config.ensemble_size);
  if (f.config.ensemble_size < 2)
    throw ConfigError("filter.ensemble_size must be >= 2");
  f.config.n_spinup = get_or(j, "filter.", "n_spinup", f.config.n_spinup);
  f.config.n_measure = get_or(j, "filter.", "n_measure", f.config.n_measure);
  if (f.config.n_spinup < 0 || f.config.n_measure < 1)
    throw ConfigError("filter spin-up/measurement cycle counts out of range");
  f.config.init_spread =
      get_or(j, "filter.", "init_spread", f.config.init_spread);
  if (j.contains("b_static")) {
    const auto& b = j.at("b_static");
    if (!b.is_array() || b.size() != 3)
      throw ConfigError("filter.b_static must be a 3x3 array");
    f.config.b_static.resize(3, 3);
    for (int i = 0; i < 3; ++i) {
      if (!b[i].is_array() || b[i].size() != 3)
        throw ConfigError("filter.b_static must be a 3x3 array");
      for (int k = 0; k < 3; ++k) f.config.b_static(i, k) = b[i][k].get<double>();
    }
  }
  return f;
}

ReversalSettings parse_reversal(const json& j) {
  reject_unknown_keys(j, "reversal.",
                      {"rho_corr", "lambda_corr", "rho_bv", "lambda_lead",
                       "horizon", "rescale_amplitude", "training_analysis_csv",
                       "training_truth_csv"});
  ReversalSettings r;
  r.thresholds.rho_corr = get_or(j, "reversal.", "rho_corr", r.thresholds.rho_corr);
  r.thresholds.lambda_corr =
      get_or(j, "reversal.", "lambda_corr", r.thresholds.lambda_corr);
  r.thresholds.rho_bv = get_or(j, "reversal.", "rho_bv", r.thresholds.rho_bv);
  r.thresholds.lambda_lead =
      get_or(j, "reversal.", "lambda_lead", r.thresholds.lambda_lead);
  r.thresholds.horizon = get_or(j, "reversal.", "horizon", r.thresholds.horizon);
  if (r.thresholds.lambda_corr < 2 || r.thresholds.horizon < 1 ||
      r.thresholds.lambda_lead < 0)
    throw ConfigError("reversal thresholds out of range");
  r.rescale_amplitude =
      get_or(j, "reversal.", "rescale_amplitude", r.rescale_amplitude);
  if (!(r.rescale_amplitude > 0))
    throw ConfigError("reversal.rescale_amplitude must be > 0");
  r.training_analysis_csv =
      get_or<std::string>(j, "reversal.", "training_analysis_csv", "");
  r.training_truth_csv =
      get_or<std::string>(j, "reversal.", "training_truth_csv", "");
  return r;
}

CalibrationSettings parse_calibration(const json& j) {
  reject_unknown_keys(
      j, "calibration.",
      {"window_samples", "continuity_weight", "max_iter", "guess"});
  CalibrationSettings c;
  c.window_samples =
      get_or(j, "calibration.", "window_samples", c.window_samples);
  c.continuity_weight =
      get_or(j, "calibration.", "continuity_weight", c.continuity_weight);
  c.max_iter = get_or(j, "calibration.", "max_iter", c.max_iter);
  if (c.window_samples < 4 || c.max_iter < 1 || c.continuity_weight < 0)
    throw ConfigError("calibration settings out of range");
  if (j.contains("guess")) c.guess = parse_model(j.at("guess"), "calibration.guess.");
  return c;
}

} // namespace

ExperimentConfig config_from_json(const json& j) {
  reject_unknown_keys(j, "",
                      {"seed", "output_dir", "nature", "model", "filter",
                       "reversal", "calibration"});
  ExperimentConfig c;
  c.seed = get_or<std::uint64_t>(j, "", "seed", c.seed);
  c.output_dir = get_or<std::string>(j, "", "output_dir", c.output_dir);
  if (!j.contains("nature"))
    throw ConfigError("missing required config section 'nature'");
  c.nature = parse_nature(j.at("nature"));
  if (j.contains("model")) c.model = parse_model(j.at("model"), "model.");
  if (j.contains("filter")) c.filter = parse_filter(j.at("filter"));
  if (j.contains("reversal")) c.reversal = parse_reversal(j.at("reversal"));
  if (j.contains("calibration"))
    c.calibration = parse_calibration(j.at("calibration"));
  c.filter.config.seed = c.seed;

  char hash[24];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(fnv1a64(j.dump())));
  c.config_hash = hash;
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path.string() + ": " +
                      e.what());
  }
  return config_from_json(j);
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  const LoopConfig& l = c.nature.loop;
  j["nature"] = {{"R", l.R},
                 {"r", l.r},
                 {"T_h", l.T_h},
                 {"T_c", l.T_c},
                 {"g", l.g},
                 {"gamma", l.gamma},
                 {"nu", l.nu},
                 {"kappa", l.kappa},
                 {"rho0", l.rho0},
                 {"c_p", l.c_p},
                 {"h_w0", l.h_w0},
                 {"f_w0", l.f_w0},
                 {"k_coeff_true", l.k_coeff_true},
                 {"c_quad", l.c_quad},
                 {"kappa_axial", l.kappa_axial},
                 {"n_cells", l.n_cells},
                 {"dt_sim", l.dt_sim},
                 {"report_interval", l.report_interval},
                 {"slab_geometry", l.slab_geometry},
                 {"noise_std", c.nature.noise_std},
                 {"transient_s", c.nature.transient_s}};
  j["model"] = {{"alpha", c.model.alpha},
                {"beta", c.model.beta},
                {"k_coeff", c.model.k_coeff},
                {"t_scale", c.model.t_scale},
                {"q_scale", c.model.q_scale}};
  const FilterConfig& f = c.filter.config;
  j["filter"] = {{"kind", to_string(f.kind)},
                 {"window_s", f.window_s},
                 {"delta", f.delta},
                 {"mu", f.mu},
                 {"obs_var", f.obs_var},
                 {"ensemble_size", f.ensemble_size},
                 {"n_spinup", f.n_spinup},
                 {"n_measure", f.n_measure},
                 {"init_spread", f.init_spread}};
  if (f.b_static.size() == 9) {
    json b = json::array();
    for (int i = 0; i < 3; ++i)
      b.push_back({f.b_static(i, 0), f.b_static(i, 1), f.b_static(i, 2)});
    j["filter"]["b_static"] = b;
  }
  const ReversalThresholds& t = c.reversal.thresholds;
  j["reversal"] = {{"rho_corr", t.rho_corr},
                   {"lambda_corr", t.lambda_corr},
                   {"rho_bv", t.rho_bv},
                   {"lambda_lead", t.lambda_lead},
                   {"horizon", t.horizon},
                   {"rescale_amplitude", c.reversal.rescale_amplitude},
                   {"training_analysis_csv", c.reversal.training_analysis_csv},
                   {"training_truth_csv", c.reversal.training_truth_csv}};
  j["calibration"] = {{"window_samples", c.calibration.window_samples},
                      {"continuity_weight", c.calibration.continuity_weight},
                      {"max_iter", c.calibration.max_iter},
                      {"guess",
                       {{"alpha", c.calibration.guess.alpha},
                        {"beta", c.calibration.guess.beta},
                        {"k_coeff", c.calibration.guess.k_coeff},
                        {"t_scale", c.calibration.guess.t_scale},
                        {"q_scale", c.calibration.guess.q_scale}}}};
  return j;
}

std::string tool_version() { return "1.0.0"; }

std::filesystem::path resolve_output_dir(const ExperimentConfig& c) {
  if (const char* root = std::getenv("THERMO_OUTPUT_ROOT"))
    return std::filesystem::path(root) / c.output_dir;
  return c.output_dir;
}

} // namespace thermo
