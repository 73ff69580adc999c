#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "ergodic_hjb/benchmarks.hpp"
#include "ergodic_hjb/config.hpp"
#include "ergodic_hjb/errors.hpp"
#include "ergodic_hjb/hjb.hpp"
#include "ergodic_hjb/trajectory.hpp"

using namespace ergodic_hjb;

namespace {

Vec v(std::initializer_list<double> xs) {
  Vec out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out(i++) = x;
  return out;
}

struct Setup {
  ControlSystem sys;
  Lagrangian lag;
};

Setup grushin() {
  const auto& b = find_benchmark("grushin-quadratic");
  auto sys = system_from_json(b.system);
  return {sys, lagrangian_from_json(b.lagrangian, sys)};
}

SolverConfig coarse(double dt = 0.05) {
  SolverConfig c;
  c.dt = dt;
  c.mesh = {3.0, 11, true};
  return c;
}

ValueField random_field(const Grid& g, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  ValueField f(g, 0.0);
  for (auto& x : f.values()) x = u(rng);
  return f;
}

}  // namespace

TEST_CASE("constant cost gives V_T = T") {
  auto sys = ControlSystem::heisenberg();
  auto one = Lagrangian::constant(3, 2, 1.0);
  auto g = Grid::cube(3, 1.0, 9);
  auto r = solve_finite_horizon(sys, one, g, {0.5, 1.0}, coarse(0.05));
  REQUIRE(r.fields.size() == 2);
  for (double x : r.fields[0].values()) CHECK(x == doctest::Approx(0.5).epsilon(1e-12));
  for (double x : r.fields[1].values()) CHECK(x == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.steps == 20);
  CHECK_FALSE(r.dt_adjusted);
}

TEST_CASE("checkpoints off the step shrink dt") {
  auto s = grushin();
  auto g = Grid::cube(2, 2.0, 11);
  auto r = solve_finite_horizon(s.sys, s.lag, g, {0.33}, coarse(0.05));
  CHECK(r.dt_adjusted);
  CHECK(r.dt <= 0.05);
  CHECK(r.dt * r.steps == doctest::Approx(0.33));
  CHECK_THROWS_AS(solve_finite_horizon(s.sys, s.lag, g, {-1.0}, coarse()), InputError);
}

TEST_CASE("normalized cost vanishes at x* and stays nonnegative") {
  auto s = grushin();
  auto g = Grid::cube(2, 2.0, 21);
  auto cfg = coarse(0.05);
  auto r = solve_finite_horizon(s.sys, s.lag, g, {1.0, 4.0}, cfg);
  for (const auto& f : r.fields) {
    CHECK(std::abs(f.interpolate(v({0, 0}))) <= r.dt * cfg.tolerance);
    CHECK(f.min() >= -cfg.tolerance);
  }
}

TEST_CASE("grid value agrees with direct minimization") {
  auto s = grushin();
  auto g = Grid::cube(2, 2.0, 81);
  SolverConfig cfg;
  cfg.dt = 0.02;
  auto r = solve_finite_horizon(s.sys, s.lag, g, {5.0}, cfg);
  DirectOptions opts;
  opts.restarts = 4;
  auto direct = direct_minimize(s.sys, s.lag, v({1, 1}), 5.0, 100, std::nullopt, opts);
  const double grid_value = r.fields[0].interpolate(v({1, 1}));
  // The direct optimizer is an upper bound on the true value.
  CHECK(grid_value == doctest::Approx(direct.cost).epsilon(0.05));
}

TEST_CASE("one more step is one more Bellman update") {
  auto s = grushin();
  auto g = Grid::cube(2, 2.0, 21);
  auto cfg = coarse(0.05);
  auto r = solve_finite_horizon(s.sys, s.lag, g, {1.0, 1.05}, cfg);
  BellmanOperator op(s.sys, s.lag, g, cfg, r.dt, BellmanOperator::Orientation::kForward);
  ValueField next(g, 0.0);
  op.apply(r.fields[0], next);
  CHECK(sup_distance(next, r.fields[1]) == 0.0);
}

TEST_CASE("parallel sweeps match the serial result") {
  auto s = grushin();
  auto g = Grid::cube(2, 2.0, 31);
  auto one = coarse(0.05);
  auto three = one;
  three.threads = 3;
  auto a = solve_finite_horizon(s.sys, s.lag, g, {1.0}, one);
  auto b = solve_finite_horizon(s.sys, s.lag, g, {1.0}, three);
  CHECK(a.fields[0].values() == b.fields[0].values());
}

TEST_CASE("non-finite values are divergence errors") {
  auto sys = ControlSystem::euclidean(1);
  auto bad = Lagrangian::generic(
      1, 1,
      [](std::span<const double> x, std::span<const double>) {
        return x[0] > 0.5 ? std::numeric_limits<double>::quiet_NaN() : 0.0;
      },
      Vec::Zero(1), Vec::Zero(1), {});
  CHECK_THROWS_AS(solve_finite_horizon(sys, bad, Grid::cube(1, 1.0, 11), {0.5}, coarse(0.05)), DivergenceError);
}

TEST_CASE("discounted value of a constant cost") {
  auto sys = ControlSystem::grushin(Expression::parse("x", 1));
  auto one = Lagrangian::constant(2, 2, 1.0);
  auto g = Grid::cube(2, 1.0, 11);
  auto cfg = coarse(0.05);
  for (double lambda : {0.5, 0.1}) {
    auto r = solve_discounted(sys, one, g, lambda, cfg);
    for (double x : r.field.values()) CHECK(x == doctest::Approx(1.0 / lambda).epsilon(cfg.tolerance));
  }
  CHECK_THROWS_AS(solve_discounted(sys, one, g, 0.0, cfg), InputError);
}

TEST_CASE("discounted values of the Grushin benchmark") {
  auto s = grushin();
  auto g = Grid::cube(2, 2.0, 41);
  auto cfg = coarse(0.05);
  std::optional<ValueField> warm;
  std::vector<ValueField> fields;
  for (double lambda : {0.4, 0.2, 0.1}) {
    auto r = solve_discounted(s.sys, s.lag, g, lambda, cfg, warm);
    CHECK(std::abs(r.field.interpolate(v({0, 0}))) <= cfg.tolerance);
    CHECK(r.field.min() >= -cfg.tolerance);
    warm = r.field;
    fields.push_back(r.field);
  }
  // lambda v_lambda decreases toward the critical value 0.
  for (Vec x : {v({0.5, 0}), v({0, 0.5}), v({1, 1}), v({-1, 0.5})}) {
    const double a = 0.4 * fields[0].interpolate(x);
    const double b = 0.2 * fields[1].interpolate(x);
    const double c = 0.1 * fields[2].interpolate(x);
    CHECK(a > b);
    CHECK(b > c);
    CHECK(c >= 0.0);
  }
}

TEST_CASE("discounted step is a contraction") {
  auto s = grushin();
  auto g = Grid::cube(2, 2.0, 21);
  auto cfg = coarse(0.05);
  cfg.boundary = BoundaryRule::kClamp;
  const double gamma = std::exp(-0.3 * cfg.dt);
  BellmanOperator op(s.sys, s.lag, g, cfg, cfg.dt, BellmanOperator::Orientation::kForward);
  std::mt19937_64 rng(3);
  ValueField ta(g, 0.0), tb(g, 0.0);
  for (int k = 0; k < 20; ++k) {
    auto a = random_field(g, rng), b = random_field(g, rng);
    op.apply(a, ta, gamma);
    op.apply(b, tb, gamma);
    CHECK(sup_distance(ta, tb) <= gamma * sup_distance(a, b) + 1e-14);
  }
}

TEST_CASE("Lax-Oleinik semigroup laws") {
  auto s = grushin();
  auto g = Grid::cube(2, 2.0, 21);
  auto cfg = coarse(0.05);
  std::mt19937_64 rng(5);
  auto phi = random_field(g, rng);

  auto zero = lax_oleinik_apply(s.sys, s.lag, phi, 0.0, cfg);
  CHECK(zero.values() == phi.values());

  auto t_phi = lax_oleinik_apply(s.sys, s.lag, phi, 0.5, cfg);
  auto t_shift = lax_oleinik_apply(s.sys, s.lag, phi + 2.5, 0.5, cfg);
  CHECK(sup_distance(t_shift, t_phi + 2.5) <= 1e-12);

  auto composed = lax_oleinik_apply(s.sys, s.lag, lax_oleinik_apply(s.sys, s.lag, phi, 0.2, cfg), 0.3, cfg);
  CHECK(sup_distance(composed, t_phi) <= 1e-12);

  auto one = Lagrangian::constant(2, 2, 1.0);
  auto t_zero = lax_oleinik_apply(s.sys, one, ValueField(g, 0.0), 0.5, cfg);
  for (double x : t_zero.values()) CHECK(x == doctest::Approx(0.5).epsilon(1e-12));

  CHECK_THROWS_AS(lax_oleinik_apply(s.sys, s.lag, phi, 0.123, cfg), InputError);
  auto di = ControlSystem::double_integrator();
  auto di_cost = Lagrangian::constant(2, 1, 1.0);
  CHECK_THROWS(lax_oleinik_apply(di, di_cost, phi, 0.5, cfg));
}

TEST_CASE("monotone scheme under the clamp rule") {
  auto s = grushin();
  auto g = Grid::cube(2, 2.0, 21);
  auto cfg = coarse(0.05);
  cfg.boundary = BoundaryRule::kClamp;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> pos(0.0, 0.5);
  int violations = 0;
  for (int k = 0; k < 30; ++k) {
    auto phi = random_field(g, rng);
    auto psi = phi;
    for (auto& x : psi.values()) x += pos(rng);
    auto a = lax_oleinik_apply(s.sys, s.lag, phi, 0.1, cfg);
    auto b = lax_oleinik_apply(s.sys, s.lag, psi, 0.1, cfg);
    for (std::size_t n = 0; n < g.size(); ++n) violations += a[n] > b[n];
  }
  CHECK(violations == 0);
}

TEST_CASE("scheme residual") {
  auto sys = ControlSystem::grushin(Expression::parse("x", 1));
  LagrangianConstants c;
  auto free = Lagrangian::quadratic_plus_potential(
      2, [](std::span<const double>) { return 0.0; }, Vec::Zero(2), Vec::Zero(2), c);
  auto g = Grid::cube(2, 1.0, 11);
  auto r = scheme_residual(sys, free, ValueField(g, 3.0), coarse(0.05));
  CHECK(r.sup == 0.0);
  REQUIRE(r.hamiltonian_sup.has_value());
  CHECK(*r.hamiltonian_sup == 0.0);

  // V_T grows at rate close to the critical value 0 for large T.
  auto s = grushin();
  auto big = Grid::cube(2, 2.0, 41);
  auto cfg = coarse(0.05);
  auto run = solve_finite_horizon(s.sys, s.lag, big, {20.0}, cfg);
  CHECK(scheme_residual(s.sys, s.lag, run.fields[0], cfg).sup <= 0.1);
}

TEST_CASE("oscillation on B_R does not grow with T") {
  auto s = grushin();
  auto g = Grid::cube(2, 2.0, 41);
  auto cfg = coarse(0.05);
  auto r = solve_finite_horizon(s.sys, s.lag, g, {5.0, 10.0}, cfg);
  auto osc = [&](const ValueField& f) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t n = 0; n < g.size(); ++n) {
      if (g.node(n).norm() > 1.0) continue;
      lo = std::min(lo, f[n]);
      hi = std::max(hi, f[n]);
    }
    return hi - lo;
  };
  CHECK(osc(r.fields[1]) <= 1.1 * osc(r.fields[0]));
}

TEST_CASE("default time step") {
  auto s = grushin();
  auto g = Grid::cube(2, 2.0, 41);
  SolverConfig cfg;
  auto mesh = solver_control_mesh(s.sys, s.lag, cfg);
  CHECK(mesh.size() > 300);
  CHECK(mesh.control(mesh.size() - 1) == s.lag.u_star());
  const double dt = resolve_time_step(s.sys, g, cfg);
  CHECK(dt == doctest::Approx(default_time_step(s.sys, g, mesh)));
  // |f(x, u)| <= |u| max(1, |x_1|) <= 3 * 2 on the box.
  CHECK(dt >= 0.5 * g.min_spacing() / 6.0);
  cfg.dt = 0.01;
  CHECK(resolve_time_step(s.sys, g, cfg) == 0.01);
}

TEST_CASE("control mesh refinement") {
  auto s = grushin();
  auto g = Grid::cube(2, 2.0, 41);
  std::vector<ValueField> fields;
  for (int points : {7, 11, 21, 41}) {
    auto cfg = coarse(0.05);
    cfg.mesh.points_per_axis = points;
    fields.push_back(solve_finite_horizon(s.sys, s.lag, g, {2.0}, cfg).fields.back());
  }
  // Finer meshes only add candidates near the old ones, so changes shrink.
  const double d1 = sup_distance(fields[0], fields[1]);
  const double d2 = sup_distance(fields[1], fields[2]);
  const double d3 = sup_distance(fields[2], fields[3]);
  CHECK(d2 < d1);
  CHECK(d3 < d2);
  for (Vec x : {v({0, 0}), v({0.5, 0.5}), v({-1, 0})})
    CHECK(std::abs(fields[3].interpolate(x) - fields[2].interpolate(x)) <= 0.02 * (1.0 + fields[3].interpolate(x)));
}

TEST_CASE("minimizing foot points rarely leave the benchmark box") {
  auto s = grushin();
  auto g = Grid::cube(2, 2.0, 41);
  SolverConfig cfg;
  cfg.dt = 0.05;
  auto run = solve_finite_horizon(s.sys, s.lag, g, {5.0}, cfg);
  CHECK(run.boundary_fraction < 0.01);
}
