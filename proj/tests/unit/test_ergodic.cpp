#include <doctest.h>

#include <cmath>
#include <random>

#include "ergodic_hjb/benchmarks.hpp"
#include "ergodic_hjb/config.hpp"
#include "ergodic_hjb/ergodic.hpp"
#include "ergodic_hjb/errors.hpp"

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

Setup benchmark(const std::string& name) {
  const auto& b = find_benchmark(name);
  auto sys = system_from_json(b.system);
  return {sys, lagrangian_from_json(b.lagrangian, sys)};
}

SolverConfig coarse(double dt = 0.05) {
  SolverConfig c;
  c.dt = dt;
  c.mesh = {3.0, 11, true};
  return c;
}

Lagrangian free_particle(int d, int m) {
  return Lagrangian::quadratic_plus_potential(
      d, [](std::span<const double>) { return 0.0; }, Vec::Zero(m), Vec::Zero(d), {});
}

// Shared coarse corrector for the fixed-point tests.
const CorrectorExtraction& coarse_corrector() {
  static const CorrectorExtraction c = [] {
    auto s = benchmark("grushin-quadratic");
    CorrectorOptions o;
    o.lipschitz_pairs = 3;
    o.sr.restarts = 2;
    return extract_corrector(s.sys, s.lag, Grid::cube(2, 2.0, 41), {0.4, 0.2, 0.1, 0.05}, coarse(), o);
  }();
  return c;
}

}  // namespace

TEST_CASE("closed-form critical value") {
  for (const auto& b : list_benchmarks()) {
    auto sys = system_from_json(b.system);
    auto lag = lagrangian_from_json(b.lagrangian, sys);
    INFO(b.name);
    const double mane = mane_closed_form(lag, 2.0, 1000, 1);
    CHECK(mane == doctest::Approx(lag.eval(lag.x_star(), lag.u_star())));
    CHECK(mane_closed_form(lag.shifted(0.3), 2.0, 1000, 1) == doctest::Approx(mane + 0.3).epsilon(1e-12));
    CHECK(std::abs(mane_closed_form(normalized(lag, 2.0), 2.0, 1000, 1)) <= 1e-12);
  }
  auto s = benchmark("grushin-quadratic");
  CHECK(mane_closed_form(s.lag, 2.0, 100, 0) == 0.0);
}

TEST_CASE("generic critical value matches a dense grid minimum") {
  // Minimum 0.7 at x = (0.25, -0.5), u = -0.5, all on the oracle grid below.
  auto lag = Lagrangian::generic(
      2, 1,
      [](std::span<const double> x, std::span<const double> u) {
        const double a = x[0] - 0.25, b = x[1] + 0.5, c = u[0] + 0.5;
        return 0.7 + a * a + 2 * b * b + a * b + c * c * (1 + a * a);
      },
      Vec::Zero(1), Vec::Zero(2), {});
  double oracle = std::numeric_limits<double>::infinity();
  for (int i = -40; i <= 40; ++i)
    for (int j = -40; j <= 40; ++j)
      for (int k = -40; k <= 40; ++k)
        oracle = std::min(oracle, lag.eval(v({i * 0.05, j * 0.05}), v({k * 0.05})));
  CHECK(std::abs(mane_closed_form(lag, 2.0, 20000, 4) - oracle) <= 1e-6);
}

TEST_CASE("default probe set") {
  auto p = default_probes(2, 1.0);
  CHECK(p.size() == 9);
  CHECK(p[0].norm() == 0.0);
  for (const auto& x : p) CHECK(x.norm() <= 1.0 + 1e-15);
  CHECK(default_probes(3, 2.0).size() == 13);
}

TEST_CASE("constant cost: every route gives 1") {
  auto sys = ControlSystem::grushin(Expression::parse("x", 1));
  auto one = Lagrangian::constant(2, 2, 1.0);
  auto g = Grid::cube(2, 1.0, 11);
  auto probes = default_probes(2, 0.5);
  ErgodicEstimate e;
  e.probes = probes;
  e.horizon = estimate_mane_horizon(sys, one, g, probes, {1.0, 2.0}, coarse());
  e.discounted = estimate_mane_discounted(sys, one, g, probes, {1.0, 0.5}, coarse());
  for (const auto& s : e.horizon)
    for (double x : s.values) CHECK(x == doctest::Approx(1.0).epsilon(1e-12));
  for (const auto& s : e.discounted)
    for (double x : s.values) CHECK(x == doctest::Approx(1.0).epsilon(1e-6));
  auto gaps = tauberian_gaps(e);
  REQUIRE(gaps.size() == 2);
  CHECK(gaps[0].horizon == 1.0);
  CHECK(gaps[0].lambda == 1.0);
  CHECK(tauberian_check(e) <= 1e-6);
}

TEST_CASE("Tauberian check needs matched pairs") {
  ErgodicEstimate e;
  e.horizon.push_back({3.0, {1.0}});
  e.discounted.push_back({0.5, {1.0}});
  CHECK(tauberian_gaps(e).empty());
  CHECK_THROWS_AS(tauberian_check(e), InputError);
}

TEST_CASE("horizon and discounted routes on the coarse Grushin benchmark") {
  auto s = benchmark("grushin-quadratic");
  auto g = Grid::cube(2, 2.0, 41);
  auto probes = default_probes(2, 1.0);
  auto cfg = coarse();
  auto horizon = estimate_mane_horizon(s.sys, s.lag, g, probes, {2.0, 4.0, 8.0}, cfg);
  auto seq = solve_discounted_sequence(s.sys, s.lag, g, {0.5, 0.25, 0.125}, cfg);
  auto discounted = discounted_series(seq, probes);

  const double mane = mane_closed_form(s.lag, 2.0, 100, 0);
  for (std::size_t k = 0; k < horizon.size(); ++k) {
    // Probe x* stays at zero; nothing drops below the critical value.
    CHECK(std::abs(horizon[k].values[0]) <= cfg.tolerance);
    CHECK(horizon[k].inf() >= mane - cfg.tolerance);
    CHECK(discounted[k].inf() >= mane - cfg.tolerance);
    if (k > 0) CHECK(horizon[k].spread() < horizon[k - 1].spread());
    for (std::size_t p = 0; p < probes.size(); ++p)
      CHECK(discounted[k].values[p] <= s.lag.constants().beta(probes[p].norm()) + cfg.tolerance);
  }
  CHECK(discounted_equibound(seq, 1.0) <= s.lag.constants().beta(1.0) + cfg.tolerance);

  ErgodicEstimate e{probes, horizon, discounted, mane};
  auto gaps = tauberian_gaps(e);
  REQUIRE(gaps.size() == 3);
  CHECK(gaps[1].gap <= gaps[0].gap);
  CHECK(gaps[2].gap <= gaps[1].gap);
}

TEST_CASE("free particle has a zero corrector") {
  auto sys = ControlSystem::grushin(Expression::parse("x", 1));
  CorrectorOptions o;
  o.lipschitz_pairs = 0;
  auto c = extract_corrector(sys, free_particle(2, 2), Grid::cube(2, 1.0, 11), {0.4, 0.2}, coarse(), o);
  for (double x : c.chi.values()) CHECK(std::abs(x) <= 1e-12);

  auto fp = lax_oleinik_fixed_point(sys, free_particle(2, 2), c.chi, coarse());
  CHECK(fp.converged);
  CHECK(fp.fixed_point_gap == 0.0);
  for (double x : fp.chi_bar.values()) CHECK(std::abs(x) <= 1e-12);
}

TEST_CASE("Grushin corrector") {
  const auto& c = coarse_corrector();
  auto cfg = coarse();
  CHECK(c.chi.min() >= -1e-6);
  CHECK(std::abs(c.chi.interpolate(v({0, 0}))) <= 1e-3);
  CHECK(c.cauchy_gaps.size() == 3);
  CHECK(c.cauchy_trend);
  CHECK(c.degree == 2);
  CHECK(c.lipschitz_samples.size() == 3);
  CHECK(c.sr_lipschitz > 0.0);
  // chi = v_lambda still carries the discount: chi - T_dt chi is about lambda dt chi.
  auto s = benchmark("grushin-quadratic");
  const double lambda = c.sequence.lambdas.back();
  CHECK(scheme_residual(s.sys, s.lag, c.chi, cfg).sup <= lambda * c.chi.max() + 5 * cfg.dt);
}

TEST_CASE("Lax-Oleinik fixed point from the corrector") {
  const auto& c = coarse_corrector();
  auto s = benchmark("grushin-quadratic");
  auto cfg = coarse();
  FixedPointOptions o;
  o.max_time = 100.0;
  auto fp = lax_oleinik_fixed_point(s.sys, s.lag, c.chi, cfg, o);
  CHECK(fp.converged);
  CHECK(fp.fixed_point_gap <= o.tolerance);
  CHECK(fp.worst_decrease <= 2 * cfg.tolerance);
  for (std::size_t n = 0; n < c.chi.grid().size(); ++n) CHECK(fp.chi_bar[n] >= c.chi[n] - cfg.tolerance);
  CHECK(scheme_residual(s.sys, s.lag, fp.chi_bar, cfg).sup <= 5 * cfg.dt);
  CHECK(fp.times.size() == fp.changes.size());
  CHECK(fp.sup_on_ball.size() == fp.times.size());

  // Shifting by a constant commutes with the semigroup.
  auto shifted = fp.chi_bar + 3.0;
  auto moved = lax_oleinik_apply(s.sys, s.lag, shifted, o.t_step, cfg);
  CHECK(sup_distance(moved, shifted) <= fp.fixed_point_gap + 1e-12);

  // Plain iteration reaches the same fixed point, only slower.
  o.accelerate_after = -1.0;
  o.max_time = 400.0;
  auto plain = lax_oleinik_fixed_point(s.sys, s.lag, c.chi, cfg, o);
  CHECK(plain.accelerated_at < 0.0);
  CHECK(plain.policy_iterations == 0);
  CHECK(sup_distance(plain.chi_bar, fp.chi_bar) <= 0.05);

  DominationOptions d;
  d.trajectories = 100;
  auto dom = domination_check(s.sys, s.lag, fp.chi_bar, d);
  CHECK(dom.trajectories == 100);
  CHECK(dom.violations == 0);
}

TEST_CASE("domination catches a steep function") {
  auto s = benchmark("grushin-quadratic");
  auto g = Grid::cube(2, 2.0, 21);
  ValueField steep(g, 0.0);
  for (std::size_t n = 0; n < g.size(); ++n) steep[n] = 50.0 * g.node(n)(0);
  DominationOptions d;
  d.trajectories = 50;
  auto r = domination_check(s.sys, s.lag, steep, d);
  CHECK(r.violations > 0);
  CHECK(r.worst > 0.0);
  // Same seed, same verdict.
  CHECK(domination_check(s.sys, s.lag, steep, d).worst == r.worst);
}

TEST_CASE("trajectory diagnostics") {
  auto s = benchmark("grushin-quadratic");
  auto g = Grid::cube(2, 2.0, 41);
  auto cfg = coarse();
  auto run = solve_finite_horizon(s.sys, s.lag, g, {2.0, 4.0}, cfg, true);
  CHECK(run.policies.size() == static_cast<std::size_t>(run.steps));
  auto starts = default_probes(2, 1.0);
  auto a = trajectory_diagnostics(s.sys, s.lag, run, cfg, 2.0, starts, 1.0);
  auto b = trajectory_diagnostics(s.sys, s.lag, run, cfg, 4.0, starts, 1.0);
  CHECK(a.trajectory_bound >= 1.0);
  CHECK(a.excursion_time >= 0.0);
  CHECK(a.excursion_time <= 2.0 + 1e-12);
  CHECK(b.control_energy >= 0.0);
  CHECK(b.oscillation > 0.0);
  CHECK(relative_change(a.trajectory_bound, b.trajectory_bound) <= 0.2);
  CHECK_THROWS(trajectory_diagnostics(s.sys, s.lag, run, cfg, 8.0, starts, 1.0));
  auto no_policies = solve_finite_horizon(s.sys, s.lag, g, {2.0}, cfg);
  CHECK_THROWS(trajectory_diagnostics(s.sys, s.lag, no_policies, cfg, 2.0, starts, 1.0));
}

TEST_CASE("relative change") {
  CHECK(relative_change(2.0, 2.2) == doctest::Approx(0.1));
  CHECK(relative_change(0.0, 0.0) == 0.0);
  CHECK(relative_change(0.0, 1.0, 0.5) == doctest::Approx(2.0));
}
