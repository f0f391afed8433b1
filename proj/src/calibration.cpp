#include "thermo/calibration.hpp"

#include <cmath>
#include <stdexcept>

namespace thermo {

int ShootingProblem::n_windows() const {
  const long n = static_cast<long>(q.size());
  return static_cast<int>(std::max(1L, (n - 1) / window_samples));
}

void ShootingProblem::validate() const {
  if (q.size() != times.size())
    throw std::invalid_argument("ShootingProblem: times/q length mismatch");
  if (q.size() < 8)
    throw std::invalid_argument("ShootingProblem: series too short");
  if (window_samples < 4)
    throw std::invalid_argument("ShootingProblem: windows need >= 4 samples");
  if (continuity_weight < 0)
    throw std::invalid_argument("ShootingProblem: negative continuity weight");
  const double dt = times[1] - times[0];
  for (size_t i = 1; i < times.size(); ++i)
    if (std::abs(times[i] - times[i - 1] - dt) > 1e-6 * std::max(1.0, dt))
      throw std::invalid_argument("ShootingProblem: sampling must be uniform");
}

namespace {

constexpr int kParamCount = 5;

struct WindowLayout {
  std::vector<long> starts; // window start sample indices, plus q.size()-1 cap
  long last_sample = 0;
};

WindowLayout layout_of(const ShootingProblem& p) {
  WindowLayout l;
  const int w = p.n_windows();
  for (int i = 0; i < w; ++i)
    l.starts.push_back(static_cast<long>(i) * p.window_samples);
  l.last_sample = static_cast<long>(p.q.size()) - 1;
  return l;
}

// integrate one sample interval of physical length dt_phys in model time
bool advance_sample(EmState& x, const EmParams& params, double dt_phys) {
  const double dtau = dt_phys / params.t_scale;
  const int m = std::max(1, static_cast<int>(std::ceil(dtau / kModelStep)));
  const double h = dtau / m;
  for (int s = 0; s < m; ++s) {
    x = rk4_step([&params](const EmState& v) { return em_rhs(v, params); }, x,
                 h);
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > 1e8) return false;
  }
  return true;
}

} // namespace

Eigen::VectorXd pack_unknowns(const std::vector<Eigen::Vector3d>& ics,
                              const EmParams& p) {
  Eigen::VectorXd u(3 * ics.size() + kParamCount);
  for (size_t w = 0; w < ics.size(); ++w) u.segment<3>(3 * w) = ics[w];
  const long base = 3 * static_cast<long>(ics.size());
  u[base + 0] = std::log(p.alpha);
  u[base + 1] = std::log(p.beta);
  u[base + 2] = std::log(p.k_coeff);
  u[base + 3] = std::log(p.t_scale);
  u[base + 4] = std::log(p.q_scale);
  return u;
}

void unpack_unknowns(const Eigen::VectorXd& u, int n_windows,
                     std::vector<Eigen::Vector3d>& ics, EmParams& p) {
  if (u.size() != 3 * n_windows + kParamCount)
    throw std::invalid_argument("unpack_unknowns: wrong unknown count");
  ics.resize(n_windows);
  for (int w = 0; w < n_windows; ++w) ics[w] = u.segment<3>(3 * w);
  const long base = 3 * static_cast<long>(n_windows);
  p.alpha = std::exp(u[base + 0]);
  p.beta = std::exp(u[base + 1]);
  p.k_coeff = std::exp(u[base + 2]);
  p.t_scale = std::exp(u[base + 3]);
  p.q_scale = std::exp(u[base + 4]);
}

Eigen::VectorXd seed_unknowns(const ShootingProblem& problem,
                              const EmParams& guess) {
  problem.validate();
  const WindowLayout l = layout_of(problem);
  const double dt_phys = problem.times[1] - problem.times[0];
  const long last = static_cast<long>(problem.q.size()) - 1;

  // x1 from the observation, x2 from the velocity equation
  // dx1/dt' = alpha (x2 - x1), x3 from the x2 equation where x1 is not
  // too small (its mean value elsewhere)
  std::vector<double> x1(last + 1), x2(last + 1);
  for (long i = 0; i <= last; ++i) x1[i] = problem.q[i] / guess.q_scale;
  for (long i = 0; i <= last; ++i) {
    const long lo = std::max(0L, i - 1);
    const long hi = std::min(last, i + 1);
    const double slope = (x1[hi] - x1[lo]) / ((hi - lo) * dt_phys);
    x2[i] = x1[i] + slope * guess.t_scale / guess.alpha;
  }

  std::vector<Eigen::Vector3d> ics;
  for (long s : l.starts) {
    Eigen::Vector3d ic;
    ic[0] = x1[s];
    ic[1] = x2[s];
    double x3 = guess.beta - 1.0;
    if (std::abs(x1[s]) > 0.5) {
      const long lo = std::max(0L, s - 1);
      const long hi = std::min(last, s + 1);
      const double dx2 =
          (x2[hi] - x2[lo]) / ((hi - lo) * dt_phys) * guess.t_scale;
      const double damping =
          1.0 + guess.k_coeff * h_transfer(std::abs(x1[s]));
      x3 = (guess.beta * x1[s] - x2[s] * damping - dx2) / x1[s];
    }
    ic[2] = x3;
    ics.push_back(ic);
  }
  return pack_unknowns(ics, guess);
}

Eigen::VectorXd shooting_residual(const ShootingProblem& problem,
                                  const Eigen::VectorXd& unknowns,
                                  bool* blowup_flag) {
  problem.validate();
  const WindowLayout l = layout_of(problem);
  const int n_windows = static_cast<int>(l.starts.size());
  std::vector<Eigen::Vector3d> ics;
  EmParams params;
  unpack_unknowns(unknowns, n_windows, ics, params);
  const double dt_phys = problem.times[1] - problem.times[0];

  const long n_obs_res = l.last_sample + 1;
  const long n_gap_res = 3L * (n_windows - 1);
  Eigen::VectorXd r(n_obs_res + n_gap_res);
  bool blew_up = false;

  for (int w = 0; w < n_windows; ++w) {
    const long first = l.starts[w];
    const long next_start =
        (w + 1 < n_windows) ? l.starts[w + 1] : l.last_sample + 1;
    EmState x = ics[w];
    bool ok = true;
    r[first] = params.q_scale * x[0] - problem.q[first];
    long i = first + 1;
    const long integrate_to = std::min<long>(
        (w + 1 < n_windows) ? next_start : l.last_sample, l.last_sample);
    for (; i <= integrate_to; ++i) {
      if (ok) ok = advance_sample(x, params, dt_phys);
      if (!ok) break;
      if (i < next_start || w + 1 == n_windows)
        r[i] = params.q_scale * x[0] - problem.q[i];
    }
    if (!ok) {
      blew_up = true;
      for (long j = i; j < next_start || (w + 1 == n_windows && j <= l.last_sample);
           ++j)
        r[j] = problem.blowup_penalty;
      if (w + 1 < n_windows)
        r.segment<3>(n_obs_res + 3L * w) =
            Eigen::Vector3d::Constant(problem.blowup_penalty);
      continue;
    }
    // continuity gaps are state-space quantities; q_scale converts them to
    // the same units as the observation residuals
    if (w + 1 < n_windows)
      r.segment<3>(n_obs_res + 3L * w) =
          problem.continuity_weight * params.q_scale * (x - ics[w + 1]);
  }

  if (blowup_flag) *blowup_flag = blew_up;
  return r;
}

namespace {

// observation residuals of a single window for fixed parameters
Eigen::VectorXd window_obs_residual(const ShootingProblem& problem,
                                    long first, long last_excl,
                                    const EmState& ic, const EmParams& params) {
  const double dt_phys = problem.times[1] - problem.times[0];
  Eigen::VectorXd r(last_excl - first);
  EmState x = ic;
  r[0] = params.q_scale * x[0] - problem.q[first];
  for (long i = first + 1; i < last_excl; ++i) {
    if (!advance_sample(x, params, dt_phys)) {
      for (long j = i; j < last_excl; ++j)
        r[j - first] = problem.blowup_penalty;
      return r;
    }
    r[i - first] = params.q_scale * x[0] - problem.q[i];
  }
  return r;
}

// independent damped Gauss-Newton polish of one window's initial
// condition with the parameters frozen; keeps the joint problem from
// starting in a hopeless basin
EmState prefit_window_ic(const ShootingProblem& problem, long first,
                         long last_excl, const EmState& seed,
                         const EmParams& params) {
  EmState ic = seed;
  Eigen::VectorXd r = window_obs_residual(problem, first, last_excl, ic, params);
  double cost = r.squaredNorm();
  double lambda = 1e-3;
  for (int iter = 0; iter < 30; ++iter) {
    Eigen::Matrix<double, Eigen::Dynamic, 3> jac(r.size(), 3);
    for (int j = 0; j < 3; ++j) {
      EmState p = ic;
      const double h = 1e-7 * std::max(std::abs(ic[j]), 1.0);
      p[j] += h;
      jac.col(j) =
          (window_obs_residual(problem, first, last_excl, p, params) - r) / h;
    }
    const Eigen::Matrix3d jtj = jac.transpose() * jac;
    const Eigen::Vector3d jtr = jac.transpose() * r;
    bool accepted = false;
    for (int attempt = 0; attempt < 8; ++attempt) {
      Eigen::Matrix3d damped = jtj;
      damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const EmState trial = ic + damped.ldlt().solve(-jtr);
      const Eigen::VectorXd rt =
          window_obs_residual(problem, first, last_excl, trial, params);
      if (rt.squaredNorm() < cost) {
        ic = trial;
        r = rt;
        const double drop = (cost - rt.squaredNorm()) / std::max(cost, 1e-300);
        cost = rt.squaredNorm();
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        if (drop < 1e-10) return ic;
        break;
      }
      lambda *= 4.0;
    }
    if (!accepted) break;
  }
  return ic;
}

} // namespace

CalibrationResult calibrate(const ShootingProblem& problem,
                            const EmParams& guess, int max_iter) {
  problem.validate();
  const int n_windows = problem.n_windows();
  Eigen::VectorXd u = seed_unknowns(problem, guess);

  {
    // stage 1: lock each window onto the data with the guess parameters
    const WindowLayout l = layout_of(problem);
    std::vector<Eigen::Vector3d> ics;
    EmParams params;
    unpack_unknowns(u, n_windows, ics, params);
    for (int w = 0; w < n_windows; ++w) {
      const long first = l.starts[w];
      const long last_excl =
          (w + 1 < n_windows) ? l.starts[w + 1] : l.last_sample + 1;
      ics[w] = prefit_window_ic(problem, first, last_excl, ics[w], params);
    }
    u = pack_unknowns(ics, params);
  }

  bool blowup = false;
  Eigen::VectorXd r = shooting_residual(problem, u, &blowup);
  double cost = r.squaredNorm();
  double lambda = 1e-3;
  int iterations = 0;
  bool converged = false;

  const long m = r.size();
  const long n = u.size();
  Eigen::MatrixXd jac(m, n);

  for (iterations = 1; iterations <= max_iter; ++iterations) {
    // forward-difference Jacobian
    for (long j = 0; j < n; ++j) {
      const double h = 1e-7 * std::max(std::abs(u[j]), 1.0);
      Eigen::VectorXd up = u;
      up[j] += h;
      jac.col(j) = (shooting_residual(problem, up) - r) / h;
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd jtr = jac.transpose() * r;

    bool accepted = false;
    for (int attempt = 0; attempt < 12; ++attempt) {
      Eigen::MatrixXd damped = jtj;
      damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const Eigen::VectorXd step = damped.ldlt().solve(-jtr);
      const Eigen::VectorXd u_try = u + step;
      bool blow_try = false;
      const Eigen::VectorXd r_try =
          shooting_residual(problem, u_try, &blow_try);
      const double cost_try = r_try.squaredNorm();
      if (cost_try < cost) {
        const double rel_drop = (cost - cost_try) / std::max(cost, 1e-300);
        u = u_try;
        r = r_try;
        cost = cost_try;
        blowup = blow_try;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        if (rel_drop < 1e-8) converged = true;
        break;
      }
      lambda *= 4.0;
    }
    if (!accepted) {
      converged = true; // no descent direction left at this precision
      break;
    }
    if (converged) break;
  }

  CalibrationResult res;
  unpack_unknowns(u, n_windows, res.window_ics, res.params);
  res.residual_norm = std::sqrt(cost);
  res.converged = converged;
  res.iterations = iterations;
  res.blowup_flagged = blowup;
  const long n_obs_res = static_cast<long>(problem.q.size());
  const long gaps = r.size() - n_obs_res;
  res.continuity_gap_norm =
      gaps > 0 && problem.continuity_weight > 0
          ? r.tail(gaps).norm() / problem.continuity_weight
          : 0.0;
  return res;
}

} // namespace thermo
