#pragma once

#include "thermo/core_models.hpp"
#include "thermo/rng.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace thermo {

/// Mean and covariance of a filter state estimate.
struct GaussianState {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Ensemble of model states, one column per member.
struct Ensemble {
  Eigen::MatrixXd members; // state dim x P

  int size() const { return static_cast<int>(members.cols()); }
  Eigen::VectorXd mean() const { return members.rowwise().mean(); }
  /// Member deviations from the mean.
  Eigen::MatrixXd perturbations() const {
    return members.colwise() - members.rowwise().mean().eval();
  }
  /// Unbiased sample covariance, divisor P-1.
  Eigen::MatrixXd covariance() const {
    const Eigen::MatrixXd x = perturbations();
    return x * x.transpose() / static_cast<double>(size() - 1);
  }
};

enum class FilterKind { kThreeDVar, kEkf, kEnsrf, kEtkf };

FilterKind filter_kind_from_string(const std::string& s);
std::string to_string(FilterKind k);

/// Per-experiment filter settings.
struct FilterConfig {
  FilterKind kind = FilterKind::kEkf;
  double window_s = 30.0;  ///< physical seconds between analyses
  double delta = 0.15;     ///< multiplicative inflation
  double mu = 0.25;        ///< additive inflation amplitude
  double obs_var = 3.6e-7; ///< observation error variance, (kg/s)^2
  int ensemble_size = 10;
  int n_spinup = 500;
  int n_measure = 2500;
  Eigen::MatrixXd b_static;     ///< 3D-Var background covariance
  double init_spread = 0.1;     ///< initial ensemble/covariance scale
  std::uint64_t seed = 0;       ///< base seed for filter-side streams
};

/// Inflation values used by the original tuning for a given window; the
/// multiplicative factor steps up for long windows, the additive one is
/// constant.
void default_inflation(FilterKind kind, double window_s, double& delta,
                       double& mu);

/// One assimilation cycle's bookkeeping.
struct AnalysisRecord {
  long cycle = 0;
  double t_s = 0.0;
  double q_truth = 0.0;
  double q_obs = 0.0;
  Eigen::Vector3d x_background = Eigen::Vector3d::Zero();
  Eigen::Vector3d x_analysis = Eigen::Vector3d::Zero();
  double scaled_bg_error = 0.0;
  std::optional<double> bv_growth;
};

struct ExperimentResult {
  std::vector<AnalysisRecord> records;
  double scaled_bg_rmse = 0.0;
  bool diverged = false;
  long divergence_cycle = -1;
  double truth_climatology = 0.0;
  int model_steps_per_cycle = 0;
  int samples_per_cycle = 0;
};

/// Nonlinear model restricted to one assimilation window: a mean
/// propagator plus a tangent-linear propagator along the mean trajectory.
struct WindowModel {
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> propagate;
  /// Returns the propagated state; evolves the perturbation columns in
  /// place under the linearized dynamics.
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, Eigen::MatrixXd&)>
      propagate_tangent;
};

/// Window model for the reduced convection model: n_steps RK4 steps.
WindowModel em_window_model(const EmParams& p, int n_steps);

/// Number of model steps mapped to a physical window (nearest integer,
/// at least one).
int window_model_steps(double window_s, const EmParams& p);

/// K = B H^T (H B H^T + R)^(-1).
Eigen::MatrixXd kalman_gain(const Eigen::MatrixXd& b, const Eigen::MatrixXd& h,
                            const Eigen::MatrixXd& r);

/// Kalman analysis step: mean update with gain, covariance contraction
/// A = (I - K H) B, symmetrized.
GaussianState kf_analysis(const Eigen::VectorXd& xb, const Eigen::MatrixXd& b,
                          const Eigen::VectorXd& y, const Eigen::MatrixXd& h,
                          const Eigen::MatrixXd& r);

/// One extended-Kalman cycle: Cholesky-factor the analysis covariance,
/// propagate mean and factor columns, inflate, analyze, add additive noise
/// to the analysis covariance diagonal. Returns (background, analysis).
std::pair<GaussianState, GaussianState> ekf_cycle(
    const GaussianState& prev, const WindowModel& model,
    const Eigen::VectorXd& y, const Eigen::MatrixXd& h,
    const Eigen::MatrixXd& r, double delta, double mu, RngStream& noise);

/// Serial square-root ensemble update. Observations are processed one
/// scalar at a time (valid for diagonal R). Includes multiplicative
/// inflation of the prior perturbations and additive member noise.
Ensemble ensrf_update(const Ensemble& background, const Eigen::VectorXd& y,
                      const Eigen::MatrixXd& h, const Eigen::VectorXd& r_diag,
                      double delta, double mu, RngStream& noise);

/// Ensemble transform update: perturbations post-multiplied by the
/// symmetric square root transform, mean updated with the ensemble gain.
Ensemble etkf_update(const Ensemble& background, const Eigen::VectorXd& y,
                     const Eigen::MatrixXd& h, const Eigen::VectorXd& r_diag,
                     double delta, double mu, RngStream& noise);

/// Run a full assimilation experiment of the reduced model against a truth
/// series sampled every `report_interval_s` with observations `y`.
/// The background RMSE is measured over the n_measure cycles after
/// n_spinup and scaled by the truth climatology over that segment.
ExperimentResult run_experiment(const std::vector<double>& q_truth,
                                const std::vector<double>& y,
                                double report_interval_s,
                                const FilterConfig& cfg, const EmParams& params);

/// Iterative estimation of a static background covariance from the time
/// average of analysis increments. Re-runs the full experiment with the
/// current estimate until the Frobenius-norm change falls below tol.
struct BEstimate {
  Eigen::Matrix3d b = Eigen::Matrix3d::Zero();
  int iterations = 0;
  bool converged = false;
};
BEstimate threedvar_estimate_B(const std::vector<double>& q_truth,
                               const std::vector<double>& y,
                               double report_interval_s, FilterConfig cfg,
                               const EmParams& params,
                               const Eigen::Matrix3d& b_init, int max_iter = 20,
                               double tol = 1e-3);

} // namespace thermo
