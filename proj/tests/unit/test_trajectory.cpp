#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "ergodic_hjb/errors.hpp"
#include "ergodic_hjb/trajectory.hpp"

using namespace ergodic_hjb;

namespace {

Vec v(std::initializer_list<double> xs) {
  Vec out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out(i++) = x;
  return out;
}

LagrangianConstants unit_constants() {
  LagrangianConstants c;
  c.theta = 0.5;
  c.normalized = true;
  return c;
}

Lagrangian quadratic(int d, int m, Lagrangian::PotentialFn g) {
  return Lagrangian::quadratic_plus_potential(d, std::move(g), Vec::Zero(m), Vec::Zero(d), unit_constants());
}

Lagrangian squared_norm(int d, int m) {
  return quadratic(d, m, [](std::span<const double> x) {
    double s = 0.0;
    for (double xi : x) s += xi * xi;
    return s;
  });
}

// One counterclockwise unit circle in the (x, y) plane over [0, 1].
Trajectory heisenberg_circle(int n) {
  auto t = uniform_time_grid(1.0, n);
  Mat u(2, n);
  const double w = 2.0 * std::numbers::pi;
  for (int k = 0; k < n; ++k) {
    // Exact average of the velocity over the interval keeps the loop closed.
    const double a = t[k], b = t[k + 1];
    u(0, k) = (std::cos(w * b) - std::cos(w * a)) / (b - a);
    u(1, k) = (std::sin(w * b) - std::sin(w * a)) / (b - a);
  }
  return integrate(ControlSystem::heisenberg(), Vec::Zero(3), u, t);
}

}  // namespace

TEST_CASE("zero control keeps a driftless system at rest") {
  auto traj = integrate(ControlSystem::heisenberg(), Vec::Zero(3), Mat::Zero(2, 10), uniform_time_grid(1.0, 10));
  CHECK(traj.states.cwiseAbs().maxCoeff() == 0.0);
  CHECK(traj.times.front() == 0.0);
  CHECK(traj.times.back() == doctest::Approx(1.0));
}

TEST_CASE("double integrator under unit acceleration") {
  auto t = uniform_time_grid(2.0, 200);
  auto traj = integrate(ControlSystem::double_integrator(), Vec::Zero(2), Mat::Ones(1, 200), t);
  CHECK((traj.final_state() - v({2, 2})).norm() <= 1e-8);
}

TEST_CASE("Heisenberg loop lifts by twice the enclosed area") {
  // The controls are piecewise constant, so the loop is an inscribed polygon;
  // Richardson extrapolation in n removes the O(1/n^2) area deficit.
  auto coarse = heisenberg_circle(200);
  auto fine = heisenberg_circle(400);
  CHECK(std::abs(fine.final_state()(0)) < 1e-12);
  CHECK(std::abs(fine.final_state()(1)) < 1e-12);
  const double zc = coarse.final_state()(2), zf = fine.final_state()(2);
  const double extrapolated = (4.0 * zf - zc) / 3.0;
  // z' = u y - v x, so a counterclockwise loop descends.
  CHECK(extrapolated == doctest::Approx(-2.0 * std::numbers::pi).epsilon(1e-6));
  CHECK(std::abs(zf + 2.0 * std::numbers::pi) < 1e-3);
}

TEST_CASE("trajectories are re-verifiable RK4 chains") {
  auto sys = ControlSystem::heisenberg();
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  Mat u(2, 20);
  for (int k = 0; k < 20; ++k) u.col(k) = v({n(rng), n(rng)});
  auto t = uniform_time_grid(1.0, 20);
  auto traj = integrate(sys, v({0.1, -0.2, 0.3}), u, t);
  for (int k = 0; k < 20; ++k) {
    CHECK(t[k + 1] > t[k]);
    Vec next = rk4_step(sys, traj.state(k), u.col(k), t[k + 1] - t[k]);
    CHECK((next - traj.state(k + 1)).norm() <= 1e-14);
  }
}

TEST_CASE("integration errors") {
  auto sys = ControlSystem::linear("blowup", Mat::Identity(1, 1) * 1e30, Mat::Identity(1, 1));
  CHECK_THROWS_AS(integrate(sys, v({1}), Mat::Zero(1, 10), uniform_time_grid(10.0, 10)), DivergenceError);
  CHECK_THROWS_AS(integrate(ControlSystem::heisenberg(), Vec::Zero(3), Mat::Zero(2, 5), uniform_time_grid(1.0, 10)),
                  InputError);
}

TEST_CASE("cost of constant trajectories") {
  auto sys = ControlSystem::euclidean(2);
  auto l = squared_norm(2, 2);
  auto at_star = integrate(sys, Vec::Zero(2), Mat::Zero(2, 7), uniform_time_grid(3.0, 7));
  CHECK(cost(l, at_star) == 0.0);
  auto at_one = integrate(sys, v({1, 0}), Mat::Zero(2, 10), uniform_time_grid(2.0, 10));
  CHECK(cost(l, at_one) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(at_one.cost == cost(l, at_one));
}

TEST_CASE("oscillator cost matches a fine reference") {
  auto sys = ControlSystem::harmonic_oscillator();
  auto l = quadratic(2, 1, [](std::span<const double> x) { return 0.5 * x[1] * x[1] + x[0] * x[0]; });
  auto run = [&](int n) {
    auto t = uniform_time_grid(2.0, n);
    Mat u(1, n);
    for (int k = 0; k < n; ++k) u(0, k) = (k * 2.0 / n) < 1.0 ? 1.0 : -0.5;  // switches on a node
    auto traj = integrate(sys, v({1, 0}), u, t);
    return cost(l, traj);
  };
  const double coarse = run(200);   // dt = 0.01
  const double reference = run(3200);
  CHECK(std::abs(coarse - reference) / reference <= 1e-4);
}

TEST_CASE("straight lines minimize Euclidean energy") {
  auto sys = ControlSystem::euclidean(2);
  auto l = quadratic(2, 2, [](std::span<const double>) { return 0.0; });
  Vec x0 = v({0.3, -0.4}), y = v({1.5, 0.8});
  DirectOptions opts;
  opts.restarts = 2;
  auto r = direct_minimize(sys, l, x0, 1.0, 16, EndpointPenalty{y, 1e3}, opts);
  CHECK(r.cost == doctest::Approx(0.5 * (x0 - y).squaredNorm()).epsilon(0.02));
  CHECK(r.endpoint_residual < 1e-2);
}

TEST_CASE("starting at x* costs nothing") {
  auto sys = ControlSystem::heisenberg();
  auto l = squared_norm(3, 2);
  DirectOptions opts;
  opts.restarts = 2;
  auto r = direct_minimize(sys, l, Vec::Zero(3), 2.0, 10, std::nullopt, opts);
  CHECK(r.cost <= 1e-8);
}

TEST_CASE("direct minimization beats staying put") {
  auto sys = ControlSystem::grushin(Expression::parse("x", 1));
  auto l = squared_norm(2, 2);
  Vec x0 = v({1, 1});
  DirectOptions opts;
  opts.restarts = 3;
  opts.seed = 9;
  auto r = direct_minimize(sys, l, x0, 2.0, 20, std::nullopt, opts);
  CHECK(r.cost <= 2.0 * x0.squaredNorm());
  CHECK(r.cost > 0.0);

  // Same seed, same answer.
  auto again = direct_minimize(sys, l, x0, 2.0, 20, std::nullopt, opts);
  CHECK(again.cost == r.cost);
}

TEST_CASE("adjoint and finite-difference gradients agree") {
  auto sys = ControlSystem::heisenberg();
  auto l = squared_norm(3, 2);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n;
  Mat u(2, 8);
  for (int k = 0; k < 8; ++k) u.col(k) = v({n(rng), n(rng)});
  auto t = uniform_time_grid(1.0, 8);
  EndpointPenalty target{v({0.5, 0.5, 0.2}), 10.0};
  auto a = direct_objective(sys, l, v({0.1, 0.2, 0.3}), t, u, target, GradientMode::kAdjoint);
  auto f = direct_objective(sys, l, v({0.1, 0.2, 0.3}), t, u, target, GradientMode::kFiniteDifference);
  CHECK(a.value == doctest::Approx(f.value));
  CHECK((a.gradient - f.gradient).norm() <= 1e-5 * (1.0 + f.gradient.norm()));
}

TEST_CASE("Gronwall and Hoelder bounds on random trajectories") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n;
  for (const auto& sys : {ControlSystem::heisenberg(), ControlSystem::grushin(Expression::parse("x", 1))}) {
    const int m = sys.control_dimension(), d = sys.dimension();
    for (int s = 0; s < 20; ++s) {
      Mat u(m, 40);
      for (int k = 0; k < 40; ++k)
        for (int i = 0; i < m; ++i) u(i, k) = 2.0 * n(rng);
      Vec x0(d);
      for (int i = 0; i < d; ++i) x0(i) = n(rng);
      auto traj = integrate(sys, x0, u, uniform_time_grid(1.0, 40));
      auto b = trajectory_bounds(sys, traj);
      CHECK(b.gronwall_ratio <= 1.0);
      CHECK(b.holder_ratio <= 1.0);
      CHECK(b.kappa >= 1.0 - 1e-12);
    }
  }
}

TEST_CASE("trajectory CSV layout") {
  auto sys = ControlSystem::euclidean(2);
  auto l = squared_norm(2, 2);
  auto traj = integrate(sys, v({1, 0}), Mat::Ones(2, 3), uniform_time_grid(1.0, 3));
  std::ostringstream out;
  write_trajectory_csv(out, l, traj);
  std::istringstream in(out.str());
  std::string header, line;
  std::getline(in, header);
  CHECK(header == "t,x_1,x_2,u_1,u_2,running_cost");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 4);
}
