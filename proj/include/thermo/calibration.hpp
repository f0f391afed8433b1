#pragma once

#include "thermo/core_models.hpp"

#include <Eigen/Dense>

#include <vector>

namespace thermo {

/// Trajectory-fitting problem: shared model parameters plus one initial
/// condition per shooting window, with soft continuity coupling between
/// consecutive windows.
struct ShootingProblem {
  std::vector<double> times;      ///< s, uniformly sampled
  std::vector<double> q;          ///< kg/s
  int window_samples = 44;        ///< samples per shooting window
  double continuity_weight = 10.0;
  double blowup_penalty = 1e6;

  int n_windows() const;
  void validate() const;
};

struct CalibrationResult {
  EmParams params;
  std::vector<Eigen::Vector3d> window_ics;
  double residual_norm = 0.0;
  double continuity_gap_norm = 0.0;
  bool converged = false;
  int iterations = 0;
  bool blowup_flagged = false;
};

/// Pack/unpack of the optimization vector: per-window ICs in linear space
/// followed by the five parameters in log space.
Eigen::VectorXd pack_unknowns(const std::vector<Eigen::Vector3d>& ics,
                              const EmParams& p);
void unpack_unknowns(const Eigen::VectorXd& u, int n_windows,
                     std::vector<Eigen::Vector3d>& ics, EmParams& p);

/// Residual vector: per-sample observation mismatches for every window,
/// then continuity gaps (3 per interior boundary) scaled by the
/// continuity weight. Integration blow-up inside a window yields a flat
/// penalty for the remaining entries.
Eigen::VectorXd shooting_residual(const ShootingProblem& problem,
                                  const Eigen::VectorXd& unknowns,
                                  bool* blowup_flag = nullptr);

/// Initial unknowns from an observed series and a parameter guess:
/// window velocity from the first observation of the window, temperature
/// variables at the convecting-equilibrium guess.
Eigen::VectorXd seed_unknowns(const ShootingProblem& problem,
                              const EmParams& guess);

/// Damped Gauss-Newton minimization of the shooting residual with
/// forward-difference Jacobians; stops when the relative residual change
/// drops below 1e-8 or after max_iter iterations.
CalibrationResult calibrate(const ShootingProblem& problem,
                            const EmParams& guess, int max_iter = 200);

} // namespace thermo
