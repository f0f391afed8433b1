#include "thermo/core_models.hpp"

namespace thermo {

double h_transfer(double x) {
  if (x < 0.0) throw std::domain_error("h_transfer: negative argument");
  if (x < 1.0) {
    return (44.0 * x * x - 55.0 * x * x * x + 20.0 * x * x * x * x) / 9.0;
  }
  return std::cbrt(x);
}

double h_transfer_prime(double x) {
  if (x < 0.0) throw std::domain_error("h_transfer_prime: negative argument");
  if (x < 1.0) {
    return (88.0 * x - 165.0 * x * x + 80.0 * x * x * x) / 9.0;
  }
  return 1.0 / (3.0 * std::cbrt(x) * std::cbrt(x));
}

EmState em_rhs(const EmState& s, const EmParams& p) {
  const double damping = 1.0 + p.k_coeff * h_transfer(std::abs(s[0]));
  EmState d;
  d[0] = p.alpha * (s[1] - s[0]);
  d[1] = p.beta * s[0] - s[1] * damping - s[0] * s[2];
  d[2] = s[0] * s[1] - s[2] * damping;
  return d;
}

Eigen::Matrix3d em_jacobian(const EmState& s, const EmParams& p) {
  const double ax = std::abs(s[0]);
  const double damping = 1.0 + p.k_coeff * h_transfer(ax);
  // d/dx1 of h(|x1|); the polynomial branch has zero slope at the origin,
  // so the limit from either side is 0 and sign(0) is immaterial.
  const double sgn = (s[0] > 0.0) ? 1.0 : (s[0] < 0.0 ? -1.0 : 0.0);
  const double dh = sgn * h_transfer_prime(ax) * p.k_coeff;

  Eigen::Matrix3d j;
  j(0, 0) = -p.alpha;
  j(0, 1) = p.alpha;
  j(0, 2) = 0.0;
  j(1, 0) = p.beta - s[1] * dh - s[2];
  j(1, 1) = -damping;
  j(1, 2) = -s[0];
  j(2, 0) = s[1] - s[2] * dh;
  j(2, 1) = s[0];
  j(2, 2) = -damping;
  return j;
}

Eigen::Vector3d lorenz_rhs(const Eigen::Vector3d& s, const LorenzParams& p) {
  return {p.sigma * (s[1] - s[0]),
          p.rho * s[0] - s[1] - s[0] * s[2],
          s[0] * s[1] - p.b * s[2]};
}

double to_observation(const EmState& s, const EmParams& p) {
  return p.q_scale * s[0];
}

Eigen::RowVector3d observation_operator(const EmParams& p) {
  return {p.q_scale, 0.0, 0.0};
}

EmState em_integrate(const EmState& s, const EmParams& p, int n_steps,
                     double dt) {
  EmState x = s;
  for (int k = 0; k < n_steps; ++k) {
    x = rk4_step([&p](const EmState& v) { return em_rhs(v, p); }, x, dt);
  }
  return x;
}

EmState em_integrate_tangent(const EmState& s, const EmParams& p, int n_steps,
                             Eigen::Matrix3d& columns, double dt) {
  // Augmented integration keeps the tangent columns evaluated on the same
  // RK4 stages as the carrying trajectory.
  using Aug = Eigen::Matrix<double, 3, 4>; // column 0: state, 1..3: tangent
  Aug a;
  a.col(0) = s;
  a.rightCols<3>() = columns;
  auto rhs = [&p](const Aug& v) {
    Aug d;
    d.col(0) = em_rhs(v.col(0), p);
    d.rightCols<3>() = em_jacobian(v.col(0), p) * v.rightCols<3>();
    return d;
  };
  for (int k = 0; k < n_steps; ++k) a = rk4_step(rhs, a, dt);
  columns = a.rightCols<3>();
  return a.col(0);
}

} // namespace thermo
