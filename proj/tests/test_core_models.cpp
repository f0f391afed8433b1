#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "thermo/core_models.hpp"
#include "thermo/rng.hpp"

#include <cmath>

using namespace thermo;

namespace {
const EmParams kDefault{}; // 7.99 / 27.3 / 0.148 / 631.6 / 0.0136

EmState random_state(RngStream& rng, double scale = 20.0) {
  return {rng.uniform(-scale, scale), rng.uniform(-scale, scale),
          rng.uniform(-scale, scale)};
}
} // namespace

TEST_CASE("h_transfer values") {
  CHECK(h_transfer(0.0) == 0.0);
  CHECK(h_transfer(1.0) == doctest::Approx(1.0).epsilon(1e-15));
  // (11 - 6.875 + 1.25) / 9 at x = 1/2
  CHECK(h_transfer(0.5) == doctest::Approx(5.375 / 9.0).epsilon(1e-15));
  CHECK(h_transfer(8.0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK_THROWS_AS(h_transfer(-0.1), std::domain_error);
}

TEST_CASE("h_transfer junctions are C0 and C1") {
  const double eps = 1e-7;
  // continuity at both branch points
  CHECK(h_transfer(1.0 - 1e-12) == doctest::Approx(h_transfer(1.0 + 1e-12))
                                       .epsilon(1e-9));
  // one-sided slopes at x = 1
  const double left = (h_transfer(1.0) - h_transfer(1.0 - eps)) / eps;
  const double right = (h_transfer(1.0 + eps) - h_transfer(1.0)) / eps;
  CHECK(std::abs(left - right) < 1e-6);
  CHECK(left == doctest::Approx(1.0 / 3.0).epsilon(1e-5));
  // slope vanishes at the origin from both sides of h(|x|)
  const double at0 = (h_transfer(eps) - h_transfer(0.0)) / eps;
  CHECK(std::abs(at0) < 1e-5);
  CHECK(h_transfer_prime(0.0) == 0.0);
}

TEST_CASE("em_rhs fixed points and a hand-evaluated state") {
  const EmState zero = EmState::Zero();
  CHECK(em_rhs(zero, kDefault).norm() == 0.0);

  // convecting fixed point of the K = 0 system
  EmParams k0 = kDefault;
  k0.k_coeff = 0.0;
  const double s = std::sqrt(k0.beta - 1.0);
  const EmState fp{s, s, k0.beta - 1.0};
  CHECK(em_rhs(fp, k0).norm() < 1e-12);

  // (1, 2, 3): dx1 = 7.99, dx2 = 27.3 - 2*1.148 - 3, dx3 = 2 - 3*1.148
  const EmState d = em_rhs({1.0, 2.0, 3.0}, kDefault);
  CHECK(d[0] == doctest::Approx(7.99).epsilon(1e-15));
  CHECK(d[1] == doctest::Approx(22.004).epsilon(1e-12));
  CHECK(d[2] == doctest::Approx(-1.444).epsilon(1e-12));
}

TEST_CASE("em_rhs with K = 0 equals the b = 1 Lorenz system") {
  EmParams p = kDefault;
  p.k_coeff = 0.0;
  const LorenzParams lp{p.alpha, p.beta, 1.0};
  RngStream rng(7);
  for (int i = 0; i < 1000; ++i) {
    const EmState x = random_state(rng);
    CHECK((em_rhs(x, p) - lorenz_rhs(x, lp)).norm() == 0.0);
  }
}

TEST_CASE("lorenz_rhs fixed points") {
  const LorenzParams p{};
  CHECK(lorenz_rhs(Eigen::Vector3d::Zero(), p).norm() == 0.0);
  const double c = std::sqrt(p.b * (p.rho - 1.0));
  CHECK(lorenz_rhs({c, c, p.rho - 1.0}, p).norm() < 1e-12);
}

TEST_CASE("em_jacobian at the origin with K = 0") {
  EmParams p = kDefault;
  p.k_coeff = 0.0;
  const Eigen::Matrix3d j = em_jacobian(EmState::Zero(), p);
  Eigen::Matrix3d expected;
  expected << -p.alpha, p.alpha, 0.0, p.beta, -1.0, 0.0, 0.0, 0.0, -1.0;
  CHECK((j - expected).norm() == 0.0);
}

namespace {
// finite-difference oracle for the Jacobian
Eigen::Matrix3d fd_jacobian(const EmState& x, const EmParams& p, double h) {
  Eigen::Matrix3d j;
  for (int c = 0; c < 3; ++c) {
    EmState xp = x, xm = x;
    xp[c] += h;
    xm[c] -= h;
    j.col(c) = (em_rhs(xp, p) - em_rhs(xm, p)) / (2.0 * h);
  }
  return j;
}

void check_jacobian_at(const EmState& x, const EmParams& p) {
  const Eigen::Matrix3d j = em_jacobian(x, p);
  const Eigen::Matrix3d fd = fd_jacobian(x, p, 1e-6);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      const double scale = std::max(1.0, std::abs(j(r, c)));
      CHECK(std::abs(j(r, c) - fd(r, c)) / scale < 1e-6);
    }
}
} // namespace

TEST_CASE("em_jacobian matches central finite differences") {
  RngStream rng(11);
  for (int i = 0; i < 100; ++i) check_jacobian_at(random_state(rng), kDefault);
  for (double x1 : {0.001, 0.999, 1.001, -0.001, -0.999, -1.001}) {
    check_jacobian_at({x1, 5.0, -3.0}, kDefault);
  }
}

TEST_CASE("em_jacobian is continuous across the x1 = 1 junction") {
  // one-sided difference estimates of d(rhs_2)/d(x1) agree at the branch
  // point because h joins with matching slope there
  const EmParams& p = kDefault;
  const double h = 1e-7;
  auto d2 = [&](double a, double b) {
    return (em_rhs({b, 2.0, 3.0}, p)[1] - em_rhs({a, 2.0, 3.0}, p)[1]) /
           (b - a);
  };
  const double left = d2(1.0 - h, 1.0);
  const double right = d2(1.0, 1.0 + h);
  CHECK(std::abs(left - right) < 1e-5);
}

TEST_CASE("rk4 leaves the state alone for a zero rhs") {
  const EmState x{1.0, -2.0, 3.0};
  const EmState y =
      rk4_step([](const EmState&) { return EmState::Zero(); }, x, 0.3);
  CHECK((x - y).norm() == 0.0);
}

TEST_CASE("rk4 against the exponential decay oracle") {
  // one step of dx/dt = -x equals the degree-4 Taylor polynomial of e^-dt;
  // the oracle gap to the true exponential at dt = 0.1 is |sum_{k>=5}
  // (-dt)^k / k!| ~ 8.2e-8
  const double dt = 0.1;
  const double num = rk4_step([](double v) { return -v; }, 1.0, dt);
  const double taylor = 1.0 - dt + dt * dt / 2 - dt * dt * dt / 6 +
                        dt * dt * dt * dt / 24;
  CHECK(num == doctest::Approx(taylor).epsilon(1e-15));
  const double err = std::abs(num - std::exp(-dt));
  CHECK(err < 1e-7);
  CHECK(err > 1e-9);
}

TEST_CASE("rk4 equals the degree-4 matrix exponential polynomial") {
  Eigen::Matrix3d a;
  a << 0.0, 1.0, 0.0, -2.0, -0.3, 0.5, 0.1, 0.0, -1.0;
  const double dt = 0.05;
  const EmState x0{1.0, 2.0, -1.0};
  const EmState num = rk4_step(
      [&a](const EmState& v) -> EmState { return a * v; }, x0, dt);
  Eigen::Matrix3d poly = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d term = Eigen::Matrix3d::Identity();
  for (int k = 1; k <= 4; ++k) {
    term = term * (dt * a) / k;
    poly += term;
  }
  CHECK((num - poly * x0).norm() < 1e-13 * x0.norm());
}

TEST_CASE("rk4 global error is fourth order") {
  auto integrate = [](double dt) {
    double x = 1.0;
    const int n = static_cast<int>(std::lround(1.0 / dt));
    for (int i = 0; i < n; ++i)
      x = rk4_step([](double v) { return -v; }, x, dt);
    return std::abs(x - std::exp(-1.0));
  };
  const double e1 = integrate(0.1);
  const double e2 = integrate(0.05);
  CHECK(e1 / e2 >= 14.0);
}

TEST_CASE("to_observation is the linear map q_scale * x1") {
  CHECK(to_observation({1.0, 9.0, -4.0}, kDefault) ==
        doctest::Approx(0.0136).epsilon(1e-15));
  CHECK(to_observation({0.0, 3.0, 2.0}, kDefault) == 0.0);
  CHECK(to_observation({-2.0, 0.0, 0.0}, kDefault) ==
        doctest::Approx(-0.0272).epsilon(1e-15));
  const Eigen::RowVector3d h = observation_operator(kDefault);
  CHECK(h(0) == 0.0136);
  CHECK(h(1) == 0.0);
  CHECK(h(2) == 0.0);
}

TEST_CASE("tangent integration matches a frozen linear model") {
  // for a state sitting at the origin of the K = 0 system the dynamics are
  // exactly linear, so the tangent columns must match the propagated basis
  EmParams p = kDefault;
  p.k_coeff = 0.0;
  Eigen::Matrix3d cols = Eigen::Matrix3d::Identity();
  const EmState end =
      em_integrate_tangent(EmState::Zero(), p, 50, cols);
  CHECK(end.norm() == 0.0);
  // oracle: integrate the same linear ODE columns directly
  const Eigen::Matrix3d j = em_jacobian(EmState::Zero(), p);
  Eigen::Matrix3d expected = Eigen::Matrix3d::Identity();
  for (int s = 0; s < 50; ++s)
    expected = rk4_step(
        [&j](const Eigen::Matrix3d& m) -> Eigen::Matrix3d { return j * m; },
        expected, kModelStep);
  CHECK((cols - expected).norm() < 1e-12 * expected.norm());
}
