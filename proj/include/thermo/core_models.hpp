#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace thermo {

/// State of the reduced convection-loop model.
/// Components: [0] dimensionless bulk velocity, [1] dimensionless
/// cross-loop temperature difference, [2] dimensionless deviation of the
/// vertical temperature profile from its conduction value.
using EmState = Eigen::Vector3d;

/// Parameters of the reduced model plus the scales that map dimensionless
/// state and time onto physical observations.
struct EmParams {
  double alpha = 7.99;     ///< Prandtl-like ratio
  double beta = 27.3;      ///< heating parameter
  double k_coeff = 0.148;  ///< magnitude of heat-transfer variation
  double t_scale = 631.6;  ///< seconds per dimensionless time unit
  double q_scale = 0.0136; ///< kg/s of mass flow per unit of x1

  void validate() const {
    if (!(alpha > 0.0)) throw std::invalid_argument("EmParams: alpha must be > 0");
    if (!(t_scale > 0.0)) throw std::invalid_argument("EmParams: t_scale must be > 0");
    if (!(q_scale > 0.0)) throw std::invalid_argument("EmParams: q_scale must be > 0");
    if (k_coeff < 0.0) throw std::invalid_argument("EmParams: k_coeff must be >= 0");
  }
};

/// Classic three-variable Lorenz parameters, used by the perfect-model
/// validation harness only.
struct LorenzParams {
  double sigma = 10.0;
  double rho = 28.0;
  double b = 8.0 / 3.0;
};

/// Dimensionless time step used by all fixed-step model integrations.
inline constexpr double kModelStep = 0.01;

/// Velocity dependence of the wall heat-transfer coefficient.
/// Quartic fit below x = 1, cube root above; the two branches join with
/// matching value and slope at x = 1.
double h_transfer(double x);

/// Derivative of h_transfer. One-sided limits agree at x = 0 and x = 1.
double h_transfer_prime(double x);

/// Right-hand side of the reduced model (per dimensionless time).
EmState em_rhs(const EmState& s, const EmParams& p);

/// Analytic Jacobian of em_rhs with respect to the state.
Eigen::Matrix3d em_jacobian(const EmState& s, const EmParams& p);

/// Standard Lorenz-63 right-hand side.
Eigen::Vector3d lorenz_rhs(const Eigen::Vector3d& s, const LorenzParams& p);

/// Mass-flow observation of a model state: q = q_scale * x1 (kg/s).
double to_observation(const EmState& s, const EmParams& p);

/// Row-vector observation operator [q_scale, 0, 0].
Eigen::RowVector3d observation_operator(const EmParams& p);

/// One classical fourth-order Runge-Kutta step of ds/dt = rhs(s).
template <class State, class Rhs>
State rk4_step(Rhs&& rhs, const State& s, double dt) {
  const State k1 = rhs(s);
  const State k2 = rhs(s + (0.5 * dt) * k1);
  const State k3 = rhs(s + (0.5 * dt) * k2);
  const State k4 = rhs(s + dt * k3);
  return s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// double-valued overload so scalar test problems do not need a vector wrapper
template <class Rhs>
double rk4_step(Rhs&& rhs, double s, double dt) {
  const double k1 = rhs(s);
  const double k2 = rhs(s + 0.5 * dt * k1);
  const double k3 = rhs(s + 0.5 * dt * k2);
  const double k4 = rhs(s + dt * k3);
  return s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Integrate the reduced model forward by n_steps fixed RK4 steps.
EmState em_integrate(const EmState& s, const EmParams& p, int n_steps,
                     double dt = kModelStep);

/// Integrate the state together with a matrix of perturbation columns
/// evolved under the tangent-linear dynamics along the trajectory.
/// Returns the propagated state; `columns` is updated in place.
EmState em_integrate_tangent(const EmState& s, const EmParams& p, int n_steps,
                             Eigen::Matrix3d& columns, double dt = kModelStep);

} // namespace thermo
