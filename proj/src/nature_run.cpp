#include "thermo/nature_run.hpp"

#include "thermo/core_models.hpp"
#include "thermo/rng.hpp"

#include <cmath>
#include <cstdio>

namespace thermo {

void LoopConfig::validate() const {
  if (n_cells < 16 || n_cells % 2 != 0)
    throw std::invalid_argument("LoopConfig: n_cells must be even and >= 16");
  if (!(T_h > T_c))
    throw std::invalid_argument("LoopConfig: T_h must exceed T_c");
  if (!(R > 0 && r > 0 && g > 0 && gamma > 0 && nu > 0 && kappa > 0 &&
        rho0 > 0 && c_p > 0 && h_w0 > 0 && f_w0 > 0 && dt_sim > 0 &&
        report_interval > 0))
    throw std::invalid_argument("LoopConfig: physical properties must be > 0");
  if (c_quad < 0 || kappa_axial < 0 || k_coeff_true < 0)
    throw std::invalid_argument("LoopConfig: model-error knobs must be >= 0");
}

double rayleigh(const LoopConfig& c) {
  return 8.0 * c.g * c.gamma * c.r * c.r * c.r * c.delta_wall() /
         (c.nu * c.kappa);
}

double wall_temperature(double phi, const LoopConfig& c) {
  double p = std::fmod(phi, 2.0 * M_PI);
  if (p < 0) p += 2.0 * M_PI;
  const double quarter = 0.5 * M_PI;
  const double eps = 1e-12;
  if (std::abs(p - quarter) < eps || std::abs(p - 3.0 * quarter) < eps)
    return c.ref_temperature();
  if (p < quarter || p > 3.0 * quarter) return c.T_h;
  return c.T_c;
}

Eigen::VectorXd cell_angles(const LoopConfig& c) {
  Eigen::VectorXd phi(c.n_cells);
  const double dphi = 2.0 * M_PI / c.n_cells;
  for (int i = 0; i < c.n_cells; ++i) phi[i] = (i + 0.5) * dphi;
  return phi;
}

namespace {

struct LoopWorkspace {
  Eigen::VectorXd sin_phi;
  Eigen::VectorXd wall;
  double dphi = 0.0;
};

LoopWorkspace make_workspace(const LoopConfig& c) {
  LoopWorkspace w;
  const Eigen::VectorXd phi = cell_angles(c);
  w.dphi = 2.0 * M_PI / c.n_cells;
  w.sin_phi.resize(c.n_cells);
  w.wall.resize(c.n_cells);
  for (int i = 0; i < c.n_cells; ++i) {
    w.sin_phi[i] = std::sin(phi[i]);
    w.wall[i] = wall_temperature(phi[i], c);
  }
  return w;
}

void loop_rhs_into(const LoopState& s, const LoopConfig& c,
                   const LoopWorkspace& w, LoopState& out) {
  const int n = c.n_cells;
  out.T.resize(n);

  // momentum: buoyancy integral by midpoint sum, linear + quadratic friction
  const double integral = (s.T.dot(w.sin_phi)) * w.dphi;
  out.u = (c.gamma * c.g / (2.0 * M_PI)) * integral - 0.5 * c.f_w0 * s.u -
          c.c_quad * s.u * std::abs(s.u);

  const double hw = c.h_w0 *
      (1.0 + c.k_coeff_true * h_transfer(std::abs(s.u) / c.u_ref()));
  const double relax = hw / (c.rho0 * c.c_p);
  const double adv = s.u / (c.R * w.dphi);
  const double diff = c.kappa_axial / (c.R * c.R * w.dphi * w.dphi);

  for (int i = 0; i < n; ++i) {
    const int im = (i == 0) ? n - 1 : i - 1;
    const int ip = (i == n - 1) ? 0 : i + 1;
    double advect;
    if (s.u >= 0.0)
      advect = -adv * (s.T[i] - s.T[im]);
    else
      advect = -adv * (s.T[ip] - s.T[i]);
    out.T[i] = advect - relax * (s.T[i] - w.wall[i]) +
               diff * (s.T[ip] - 2.0 * s.T[i] + s.T[im]);
  }
}

void check_bounds(const LoopState& s, const LoopConfig& c, double t) {
  const double dT = c.delta_wall();
  const double lo = c.T_c - 5.0 * dT;
  const double hi = c.T_h + 5.0 * dT;
  for (int i = 0; i < s.T.size(); ++i) {
    if (!std::isfinite(s.T[i]) || s.T[i] < lo || s.T[i] > hi) {
      char buf[128];
      std::snprintf(buf, sizeof(buf),
                    "loop solver blow-up at t = %.3f s (cell %d, T = %g K)",
                    t, i, s.T[i]);
      throw BlowupError(buf);
    }
  }
  if (!std::isfinite(s.u)) throw BlowupError("loop solver blow-up: u not finite");
}

} // namespace

LoopState loop_rhs(const LoopState& s, const LoopConfig& c) {
  if (s.T.size() != c.n_cells)
    throw std::invalid_argument("loop_rhs: state size mismatch");
  const LoopWorkspace w = make_workspace(c);
  LoopState out;
  loop_rhs_into(s, c, w, out);
  return out;
}

LoopState default_initial_state(const LoopConfig& c, double u0) {
  LoopState s;
  s.u = u0;
  const Eigen::VectorXd phi = cell_angles(c);
  s.T.resize(c.n_cells);
  for (int i = 0; i < c.n_cells; ++i) s.T[i] = wall_temperature(phi[i], c);
  return s;
}

TruthSeries simulate_truth(const LoopConfig& c, double duration,
                           const LoopState& ic, double transient,
                           std::uint64_t seed) {
  c.validate();
  if (ic.T.size() != c.n_cells)
    throw std::invalid_argument("simulate_truth: initial state size mismatch");
  if (duration < c.report_interval)
    throw std::invalid_argument("simulate_truth: duration below report interval");
  if (transient < 0.0) transient = std::max(0.1 * duration, 7200.0);

  const LoopWorkspace w = make_workspace(c);
  // RK4 on the packed (u, T) state
  LoopState x = ic;
  LoopState k1, k2, k3, k4, tmp;
  auto stage = [&](const LoopState& base, const LoopState& k, double f,
                   LoopState& dst) {
    dst.u = base.u + f * k.u;
    dst.T = base.T + f * k.T;
  };

  TruthSeries out;
  out.seed = seed;
  out.config = c;
  const double dt = c.dt_sim;
  const long steps_per_report =
      std::max<long>(1, std::lround(c.report_interval / dt));
  const long transient_steps = std::lround(transient / dt);
  const long report_count = std::lround(duration / c.report_interval);
  out.times.reserve(report_count);
  out.q.reserve(report_count);

  long step = 0;
  auto record = [&]() {
    const double t = step * dt - transient;
    out.times.push_back(t);
    out.q.push_back(c.area_factor() * x.u);
  };

  const long total_steps = transient_steps + (report_count - 1) * steps_per_report;
  for (;; ++step) {
    if (step >= transient_steps &&
        (step - transient_steps) % steps_per_report == 0)
      record();
    if (step >= total_steps) break;
    loop_rhs_into(x, c, w, k1);
    stage(x, k1, 0.5 * dt, tmp);
    loop_rhs_into(tmp, c, w, k2);
    stage(x, k2, 0.5 * dt, tmp);
    loop_rhs_into(tmp, c, w, k3);
    stage(x, k3, dt, tmp);
    loop_rhs_into(tmp, c, w, k4);
    x.u += (dt / 6.0) * (k1.u + 2.0 * k2.u + 2.0 * k3.u + k4.u);
    x.T += (dt / 6.0) * (k1.T + 2.0 * k2.T + 2.0 * k3.T + k4.T);
    if (step % 64 == 0) check_bounds(x, c, step * dt);
  }
  check_bounds(x, c, step * dt);
  return out;
}

std::vector<double> observe(const TruthSeries& series, double noise_std,
                            std::uint64_t seed) {
  if (noise_std < 0.0)
    throw std::invalid_argument("observe: noise_std must be >= 0");
  std::vector<double> y = series.q;
  if (noise_std == 0.0) return y;
  RngStream rng(seed, "observation-noise");
  for (double& v : y) v += noise_std * rng.normal();
  return y;
}

double climatology(const std::vector<double>& q) {
  if (q.empty()) throw std::invalid_argument("climatology: empty series");
  double s = 0.0;
  for (double v : q) s += v * v;
  return std::sqrt(s / static_cast<double>(q.size()));
}

} // namespace thermo
