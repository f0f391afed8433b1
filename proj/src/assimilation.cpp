#include "thermo/assimilation.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace thermo {

FilterKind filter_kind_from_string(const std::string& s) {
  if (s == "threedvar" || s == "3dvar") return FilterKind::kThreeDVar;
  if (s == "ekf") return FilterKind::kEkf;
  if (s == "ensrf") return FilterKind::kEnsrf;
  if (s == "etkf") return FilterKind::kEtkf;
  throw std::invalid_argument("unknown filter kind: " + s);
}

std::string to_string(FilterKind k) {
  switch (k) {
    case FilterKind::kThreeDVar: return "threedvar";
    case FilterKind::kEkf: return "ekf";
    case FilterKind::kEnsrf: return "ensrf";
    case FilterKind::kEtkf: return "etkf";
  }
  return "?";
}

void default_inflation(FilterKind kind, double window_s, double& delta,
                       double& mu) {
  mu = 0.25;
  if (kind == FilterKind::kEkf) {
    delta = window_s <= 360.0 ? 0.15 : (window_s <= 510.0 ? 0.20 : 0.25);
  } else {
    delta = window_s <= 360.0 ? 0.15 : (window_s <= 450.0 ? 0.20 : 0.25);
  }
  if (kind == FilterKind::kThreeDVar) {
    delta = 0.0;
    mu = 0.0;
  }
}

WindowModel em_window_model(const EmParams& p, int n_steps) {
  WindowModel m;
  m.propagate = [p, n_steps](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return em_integrate(EmState(x), p, n_steps);
  };
  m.propagate_tangent = [p, n_steps](const Eigen::VectorXd& x,
                                     Eigen::MatrixXd& cols) -> Eigen::VectorXd {
    Eigen::Matrix3d c = cols;
    const EmState out = em_integrate_tangent(EmState(x), p, n_steps, c);
    cols = c;
    return out;
  };
  return m;
}

int window_model_steps(double window_s, const EmParams& p) {
  const double step_s = p.t_scale * kModelStep;
  return std::max(1L, std::lround(window_s / step_s));
}

Eigen::MatrixXd kalman_gain(const Eigen::MatrixXd& b, const Eigen::MatrixXd& h,
                            const Eigen::MatrixXd& r) {
  const Eigen::MatrixXd s = h * b * h.transpose() + r;
  if (s.rows() == 1) {
    if (!(s(0, 0) > 0.0))
      throw std::runtime_error("kalman_gain: innovation covariance not positive");
    return b * h.transpose() / s(0, 0);
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw std::runtime_error("kalman_gain: innovation covariance singular");
  return ldlt.solve(h * b).transpose();
}

GaussianState kf_analysis(const Eigen::VectorXd& xb, const Eigen::MatrixXd& b,
                          const Eigen::VectorXd& y, const Eigen::MatrixXd& h,
                          const Eigen::MatrixXd& r) {
  const Eigen::MatrixXd k = kalman_gain(b, h, r);
  GaussianState out;
  out.mean = xb + k * (y - h * xb);
  const Eigen::MatrixXd ikh =
      Eigen::MatrixXd::Identity(b.rows(), b.cols()) - k * h;
  Eigen::MatrixXd a = ikh * b;
  out.cov = 0.5 * (a + a.transpose());
  return out;
}

namespace {

// Cholesky with one symmetrize-and-jitter retry.
Eigen::MatrixXd robust_cholesky(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::MatrixXd fixed = 0.5 * (m + m.transpose());
  fixed.diagonal().array() += 1e-12;
  Eigen::LLT<Eigen::MatrixXd> retry(fixed);
  if (retry.info() != Eigen::Success)
    throw std::runtime_error("covariance not positive semi-definite");
  return retry.matrixL();
}

} // namespace

std::pair<GaussianState, GaussianState> ekf_cycle(
    const GaussianState& prev, const WindowModel& model,
    const Eigen::VectorXd& y, const Eigen::MatrixXd& h,
    const Eigen::MatrixXd& r, double delta, double mu, RngStream& noise) {
  Eigen::MatrixXd cols = robust_cholesky(prev.cov);
  GaussianState background;
  background.mean = model.propagate_tangent(prev.mean, cols);
  background.cov = cols * cols.transpose();
  background.cov *= (1.0 + delta);

  GaussianState analysis = kf_analysis(background.mean, background.cov, y, h, r);
  for (int i = 0; i < analysis.cov.rows(); ++i)
    analysis.cov(i, i) += mu * noise.uniform01();
  return {background, analysis};
}

namespace {

void apply_additive_member_noise(Eigen::MatrixXd& members, double mu,
                                 RngStream& noise) {
  if (mu == 0.0) return;
  for (int j = 0; j < members.cols(); ++j)
    for (int i = 0; i < members.rows(); ++i)
      members(i, j) += mu * noise.uniform01();
}

void check_obs_shapes(const Eigen::MatrixXd& members, const Eigen::VectorXd& y,
                      const Eigen::MatrixXd& h, const Eigen::VectorXd& r_diag) {
  if (h.rows() != y.size() || h.cols() != members.rows() ||
      r_diag.size() != y.size())
    throw std::invalid_argument("ensemble update: inconsistent shapes");
  if (members.cols() < 2)
    throw std::invalid_argument("ensemble update: need at least 2 members");
}

} // namespace

Ensemble ensrf_update(const Ensemble& background, const Eigen::VectorXd& y,
                      const Eigen::MatrixXd& h, const Eigen::VectorXd& r_diag,
                      double delta, double mu, RngStream& noise) {
  check_obs_shapes(background.members, y, h, r_diag);
  const int p = background.size();
  Eigen::VectorXd mean = background.mean();
  Eigen::MatrixXd x = background.perturbations();
  if (x.norm() == 0.0)
    throw std::runtime_error("ensrf_update: degenerate ensemble (zero spread)");
  x *= std::sqrt(1.0 + delta);

  // scalar observations processed serially (R diagonal)
  for (int j = 0; j < y.size(); ++j) {
    const Eigen::RowVectorXd hj = h.row(j);
    const Eigen::MatrixXd b = x * x.transpose() / static_cast<double>(p - 1);
    const double s = (hj * b * hj.transpose())(0) + r_diag[j];
    if (!(s > 0.0))
      throw std::runtime_error("ensrf_update: innovation covariance not positive");
    const Eigen::VectorXd k = b * hj.transpose() / s;
    mean += k * (y[j] - hj * mean);
    const double alpha = 1.0 / (1.0 + std::sqrt(r_diag[j] / s));
    x -= (alpha * k) * (hj * x);
  }

  Ensemble out;
  out.members = x.colwise() + mean;
  apply_additive_member_noise(out.members, mu, noise);
  return out;
}

Ensemble etkf_update(const Ensemble& background, const Eigen::VectorXd& y,
                     const Eigen::MatrixXd& h, const Eigen::VectorXd& r_diag,
                     double delta, double mu, RngStream& noise) {
  check_obs_shapes(background.members, y, h, r_diag);
  const int p = background.size();
  Eigen::VectorXd mean = background.mean();
  Eigen::MatrixXd x = background.perturbations();
  if (x.norm() == 0.0)
    throw std::runtime_error("etkf_update: degenerate ensemble (zero spread)");
  x *= std::sqrt(1.0 + delta);

  const Eigen::MatrixXd hx = h * x; // m x P
  const Eigen::MatrixXd rinv_hx = r_diag.cwiseInverse().asDiagonal() * hx;
  Eigen::MatrixXd a_hat_inv =
      (p - 1) * Eigen::MatrixXd::Identity(p, p) + hx.transpose() * rinv_hx;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a_hat_inv);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("etkf_update: transform eigensolve failed");
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw std::runtime_error("etkf_update: transform not positive definite");
  // T = [(P-1) a_hat]^(1/2), symmetric square root
  const Eigen::VectorXd t_eigs =
      ((p - 1) * es.eigenvalues().cwiseInverse()).cwiseSqrt();
  const Eigen::MatrixXd t =
      es.eigenvectors() * t_eigs.asDiagonal() * es.eigenvectors().transpose();

  const Eigen::MatrixXd b = x * x.transpose() / static_cast<double>(p - 1);
  const Eigen::MatrixXd r = Eigen::MatrixXd(r_diag.asDiagonal());
  const Eigen::MatrixXd k = kalman_gain(b, h, r);
  mean += k * (y - h * mean);

  Ensemble out;
  out.members = (x * t).colwise() + mean;
  apply_additive_member_noise(out.members, mu, noise);
  return out;
}

namespace {

struct FilterState {
  // exactly one of these is active depending on kind
  GaussianState gaussian;  // ekf
  Eigen::VectorXd mean;    // threedvar
  Ensemble ensemble;       // ensrf/etkf
};

} // namespace

ExperimentResult run_experiment(const std::vector<double>& q_truth,
                                const std::vector<double>& y,
                                double report_interval_s,
                                const FilterConfig& cfg,
                                const EmParams& params) {
  params.validate();
  if (q_truth.size() != y.size())
    throw std::invalid_argument("run_experiment: truth/observation length mismatch");
  if (!(report_interval_s > 0))
    throw std::invalid_argument("run_experiment: bad report interval");

  const int spc =
      std::max(1L, std::lround(cfg.window_s / report_interval_s));
  const long total_cycles = cfg.n_spinup + cfg.n_measure;
  const long needed = total_cycles * static_cast<long>(spc) + 1;
  if (static_cast<long>(y.size()) < needed) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "run_experiment: series of %zu samples is too short; "
                  "%ld cycles at window %.1f s need %ld samples",
                  y.size(), total_cycles, cfg.window_s, needed);
    throw std::invalid_argument(buf);
  }

  const int n_steps = window_model_steps(cfg.window_s, params);
  const WindowModel model = em_window_model(params, n_steps);
  const Eigen::RowVector3d h3 = observation_operator(params);
  const Eigen::MatrixXd h = h3;
  const Eigen::MatrixXd r = Eigen::MatrixXd::Constant(1, 1, cfg.obs_var);
  const Eigen::VectorXd r_diag = Eigen::VectorXd::Constant(1, cfg.obs_var);

  // climatology over the measurement segment's cycle points
  double clim_sq = 0.0;
  for (long k = cfg.n_spinup + 1; k <= total_cycles; ++k) {
    const double q = q_truth[k * spc];
    clim_sq += q * q;
  }
  const double clim = std::sqrt(clim_sq / cfg.n_measure);
  if (!(clim > 0.0))
    throw std::invalid_argument("run_experiment: zero truth climatology");

  RngStream additive_noise(cfg.seed, "additive-inflation");
  RngStream init_stream(cfg.seed, "ensemble-init");

  // first-observation start: velocity from the observation, temperature
  // variables at the convecting-equilibrium guess
  Eigen::Vector3d x0;
  x0[0] = y[0] / params.q_scale;
  x0[1] = x0[0];
  x0[2] = params.beta - 1.0;

  FilterState st;
  switch (cfg.kind) {
    case FilterKind::kThreeDVar: {
      st.mean = x0;
      if (cfg.b_static.rows() != 3 || cfg.b_static.cols() != 3)
        throw std::invalid_argument("run_experiment: 3D-Var requires a static B");
      break;
    }
    case FilterKind::kEkf: {
      st.gaussian.mean = x0;
      st.gaussian.cov =
          cfg.init_spread * cfg.init_spread * Eigen::Matrix3d::Identity();
      break;
    }
    case FilterKind::kEnsrf:
    case FilterKind::kEtkf: {
      if (cfg.ensemble_size < 2)
        throw std::invalid_argument("run_experiment: ensemble size must be >= 2");
      st.ensemble.members.resize(3, cfg.ensemble_size);
      for (int j = 0; j < cfg.ensemble_size; ++j)
        for (int i = 0; i < 3; ++i)
          st.ensemble.members(i, j) =
              x0[i] + cfg.init_spread * init_stream.normal();
      break;
    }
  }

  ExperimentResult res;
  res.truth_climatology = clim;
  res.model_steps_per_cycle = n_steps;
  res.samples_per_cycle = spc;
  res.records.reserve(total_cycles);

  double rmse_sq = 0.0;
  int consecutive_bad = 0;

  for (long k = 1; k <= total_cycles; ++k) {
    const long idx = k * spc;
    AnalysisRecord rec;
    rec.cycle = k;
    rec.t_s = idx * report_interval_s;
    rec.q_truth = q_truth[idx];
    rec.q_obs = y[idx];
    const Eigen::VectorXd yk = Eigen::VectorXd::Constant(1, y[idx]);

    switch (cfg.kind) {
      case FilterKind::kThreeDVar: {
        const Eigen::VectorXd xb = model.propagate(st.mean);
        rec.x_background = xb;
        const GaussianState an = kf_analysis(xb, cfg.b_static, yk, h, r);
        st.mean = an.mean;
        rec.x_analysis = an.mean;
        break;
      }
      case FilterKind::kEkf: {
        auto [bg, an] = ekf_cycle(st.gaussian, model, yk, h, r, cfg.delta,
                                  cfg.mu, additive_noise);
        rec.x_background = bg.mean;
        rec.x_analysis = an.mean;
        st.gaussian = an;
        break;
      }
      case FilterKind::kEnsrf:
      case FilterKind::kEtkf: {
        for (int j = 0; j < st.ensemble.size(); ++j)
          st.ensemble.members.col(j) =
              model.propagate(st.ensemble.members.col(j));
        rec.x_background = st.ensemble.mean();
        st.ensemble = (cfg.kind == FilterKind::kEnsrf)
                          ? ensrf_update(st.ensemble, yk, h, r_diag, cfg.delta,
                                         cfg.mu, additive_noise)
                          : etkf_update(st.ensemble, yk, h, r_diag, cfg.delta,
                                        cfg.mu, additive_noise);
        rec.x_analysis = st.ensemble.mean();
        break;
      }
    }

    const double dq = rec.q_truth - h3.dot(rec.x_background);
    rec.scaled_bg_error = std::abs(dq) / clim;
    if (k > cfg.n_spinup) rmse_sq += dq * dq;
    res.records.push_back(rec);

    consecutive_bad = (rec.scaled_bg_error > 10.0) ? consecutive_bad + 1 : 0;
    if (consecutive_bad >= 50) {
      res.diverged = true;
      res.divergence_cycle = k;
      break;
    }
  }

  const long measured =
      res.diverged ? std::max(0L, res.divergence_cycle - cfg.n_spinup)
                   : cfg.n_measure;
  res.scaled_bg_rmse =
      measured > 0 ? std::sqrt(rmse_sq / measured) / clim
                   : std::numeric_limits<double>::infinity();
  return res;
}

BEstimate threedvar_estimate_B(const std::vector<double>& q_truth,
                               const std::vector<double>& y,
                               double report_interval_s, FilterConfig cfg,
                               const EmParams& params,
                               const Eigen::Matrix3d& b_init, int max_iter,
                               double tol) {
  cfg.kind = FilterKind::kThreeDVar;
  cfg.delta = 0.0;
  cfg.mu = 0.0;
  BEstimate est;
  est.b = b_init;
  for (est.iterations = 1; est.iterations <= max_iter; ++est.iterations) {
    cfg.b_static = est.b;
    const ExperimentResult run =
        run_experiment(q_truth, y, report_interval_s, cfg, params);
    Eigen::Matrix3d acc = Eigen::Matrix3d::Zero();
    long count = 0;
    for (const AnalysisRecord& rec : run.records) {
      if (rec.cycle <= cfg.n_spinup) continue;
      const Eigen::Vector3d d = rec.x_background - rec.x_analysis;
      acc += d * d.transpose();
      ++count;
    }
    if (count == 0)
      throw std::runtime_error("threedvar_estimate_B: no post-spinup cycles");
    acc /= static_cast<double>(count);
    const double change =
        (acc - est.b).norm() / std::max(est.b.norm(), 1e-300);
    est.b = acc;
    if (change < tol) {
      est.converged = true;
      break;
    }
  }
  return est;
}

} // namespace thermo
