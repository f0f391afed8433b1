#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace thermo {

/// Physical and numerical configuration of the finite-volume loop solver
/// that generates the synthetic truth.
///
/// The quadratic friction coefficient `c_quad` and the axial diffusivity
/// `kappa_axial` have no counterpart in the reduced forecast model; they
/// (together with the first-order advection scheme) are what makes the
/// truth structurally different from any parameter choice of that model.
struct LoopConfig {
  // Geometry and fluid properties follow a water-filled loop; the heating
  // level g sits well inside the chaotic regime, and the damping scales
  // h_w0/f_w0 put the natural oscillation period near 11 minutes.
  double R = 0.36;        ///< loop radius, m
  double r = 0.015;       ///< tube radius, m
  double T_h = 305.0;     ///< heated (lower) wall temperature, K
  double T_c = 295.0;     ///< cooled (upper) wall temperature, K
  double g = 0.36112;     ///< gravitational acceleration, m/s^2
  double gamma = 2.07e-4; ///< thermal expansion coefficient, 1/K
  double nu = 1.004e-6;   ///< kinematic viscosity, m^2/s
  double kappa = 1.43e-7; ///< thermal diffusivity, m^2/s
  double rho0 = 1000.0;   ///< reference density, kg/m^3
  double c_p = 4180.0;    ///< specific heat, J/(kg K)
  double h_w0 = 6617.796; ///< base wall heat-transfer coefficient, W/(m^3 K)
  double f_w0 = 0.0253006;///< linear friction coefficient, 1/s
  double k_coeff_true = 0.148; ///< heat-transfer variation magnitude
  double c_quad = 0.10;   ///< quadratic friction coefficient, 1/m
  double kappa_axial = 1.0e-5; ///< axial diffusion, m^2/s
  int n_cells = 180;      ///< angular finite-volume cells (even, >= 16)
  double dt_sim = 0.5;    ///< solver time step, s
  double report_interval = 10.0; ///< truth sampling interval, s
  bool slab_geometry = false;    ///< q = 2 r rho0 u per unit depth if true

  double delta_wall() const { return T_h - T_c; }
  double ref_temperature() const { return 0.5 * (T_h + T_c); }
  /// Velocity scale that maps |u| onto the argument of the heat-transfer
  /// law; equal to the loop's thermal relaxation velocity R h_w0/(rho0 c_p).
  double u_ref() const { return R * h_w0 / (rho0 * c_p); }
  /// Cross-section factor in q = area_factor * u.
  double area_factor() const {
    return slab_geometry ? 2.0 * r * rho0 : M_PI * r * r * rho0;
  }

  void validate() const;
};

/// Instantaneous state of the loop: one bulk velocity (incompressible flow
/// makes it spatially uniform) plus cell-averaged temperatures.
struct LoopState {
  double u = 0.0;           ///< bulk velocity, m/s
  Eigen::VectorXd T;        ///< per-cell temperature, K, size n_cells
};

/// Uniformly sampled mass-flow-rate record of a truth integration.
struct TruthSeries {
  std::vector<double> times; ///< s
  std::vector<double> q;     ///< kg/s
  std::uint64_t seed = 0;
  LoopConfig config;
};

/// Error raised when the solver detects a temperature excursion outside
/// the physically plausible band (integration blow-up).
struct BlowupError : std::runtime_error {
  explicit BlowupError(const std::string& what) : std::runtime_error(what) {}
};

/// Rayleigh number of the configuration, 8 g gamma r^3 dT / (nu kappa).
double rayleigh(const LoopConfig& c);

/// Imposed wall temperature at angle phi (measured from the bottom of the
/// loop). Hot on the lower half, cold on the upper half, mean value at the
/// two junctions.
double wall_temperature(double phi, const LoopConfig& c);

/// Cell-center angles of the discretization.
Eigen::VectorXd cell_angles(const LoopConfig& c);

/// Semi-discrete right-hand side: d/dt of (u, T).
/// Advection is first-order upwind; the buoyancy integral is a midpoint
/// sum over cell centers.
LoopState loop_rhs(const LoopState& s, const LoopConfig& c);

/// Conduction-profile initial state (T = wall profile, tiny velocity kick).
LoopState default_initial_state(const LoopConfig& c, double u0 = 1e-6);

/// Integrate the loop and sample q = area_factor * u every report interval
/// for `duration` seconds after discarding `transient` seconds.
/// transient < 0 selects the default max(0.1 * duration, 7200 s).
TruthSeries simulate_truth(const LoopConfig& c, double duration,
                           const LoopState& ic, double transient = -1.0,
                           std::uint64_t seed = 0);

/// Truth plus Gaussian observation noise; deterministic for a fixed seed.
std::vector<double> observe(const TruthSeries& series, double noise_std,
                            std::uint64_t seed);

/// Root mean square of q over the series.
double climatology(const std::vector<double>& q);

} // namespace thermo
