#include "thermo/breeding.hpp"

#include <cmath>
#include <stdexcept>

namespace thermo {

BredVector initial_bred_vector(double amplitude) {
  BredVector bv;
  bv.delta = amplitude * Eigen::Vector3d::Ones().normalized();
  return bv;
}

BredVector breed_step(const EmState& base, const BredVector& bv,
                      const EmParams& params, int n_steps, double amplitude) {
  if (!(bv.delta.norm() > 0.0))
    throw std::invalid_argument("breed_step: zero perturbation");
  if (n_steps < 1) throw std::invalid_argument("breed_step: empty window");
  const EmState unperturbed = em_integrate(base, params, n_steps);
  const EmState perturbed = em_integrate(base + bv.delta, params, n_steps);
  const Eigen::Vector3d diff = perturbed - unperturbed;
  const double norm = diff.norm();
  if (norm == 0.0)
    throw std::runtime_error("breed_step: perturbed trajectory coincides with base");
  const double window_time = n_steps * kModelStep;
  BredVector out;
  out.growth = std::log(norm / bv.delta.norm()) / window_time;
  out.delta = diff * (amplitude / norm);
  return out;
}

std::vector<std::optional<double>> growth_series(
    const std::vector<Eigen::Vector3d>& analyses, const EmParams& params,
    int n_steps, double amplitude) {
  std::vector<std::optional<double>> growth(analyses.size());
  if (analyses.empty()) return growth;
  BredVector bv = initial_bred_vector(amplitude);
  for (size_t k = 1; k < analyses.size(); ++k) {
    bv = breed_step(analyses[k - 1], bv, params, n_steps, amplitude);
    growth[k] = bv.growth;
  }
  return growth;
}

double leading_lyapunov_estimate(const EmState& start, const EmParams& params,
                                 long n_windows, int steps_per_window,
                                 long discard_windows) {
  EmState x = start;
  Eigen::Matrix3d cols = Eigen::Matrix3d::Zero();
  cols.col(0) = Eigen::Vector3d(1, 1, 1).normalized();
  double log_sum = 0.0;
  long counted = 0;
  for (long w = 0; w < n_windows + discard_windows; ++w) {
    x = em_integrate_tangent(x, params, steps_per_window, cols);
    const double g = cols.col(0).norm();
    if (!(g > 0.0))
      throw std::runtime_error("lyapunov estimate: tangent vector vanished");
    if (w >= discard_windows) {
      log_sum += std::log(g);
      ++counted;
    }
    cols.col(0) /= g;
  }
  return log_sum / (counted * steps_per_window * kModelStep);
}

} // namespace thermo
