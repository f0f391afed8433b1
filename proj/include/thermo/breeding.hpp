#pragma once

#include "thermo/core_models.hpp"

#include <optional>
#include <vector>

namespace thermo {

/// A finite perturbation maintained along a trajectory by periodic
/// rescaling, together with the log growth it experienced over the most
/// recent window (natural log per dimensionless model time).
struct BredVector {
  Eigen::Vector3d delta = Eigen::Vector3d::Zero();
  double growth = 0.0;
};

inline constexpr double kDefaultRescaleAmplitude = 1e-3;

/// Deterministic starting perturbation of a given amplitude.
BredVector initial_bred_vector(double amplitude = kDefaultRescaleAmplitude);

/// Integrate the base state and the perturbed state over one window of
/// n_steps model steps; measure the log amplification of their difference
/// and rescale it back to `amplitude` along its final direction.
BredVector breed_step(const EmState& base, const BredVector& bv,
                      const EmParams& params, int n_steps,
                      double amplitude = kDefaultRescaleAmplitude);

/// Per-cycle bred-vector growth along an analysis trajectory. Entry k is
/// the growth over the window that starts from analysis state k-1; the
/// first entry is absent.
std::vector<std::optional<double>> growth_series(
    const std::vector<Eigen::Vector3d>& analyses, const EmParams& params,
    int n_steps, double amplitude = kDefaultRescaleAmplitude);

/// Leading Lyapunov exponent by tangent-linear propagation with periodic
/// renormalization; the independent reference for bred-vector growth.
double leading_lyapunov_estimate(const EmState& start, const EmParams& params,
                                 long n_windows, int steps_per_window,
                                 long discard_windows = 100);

} // namespace thermo
