#include "ergodic_hjb/srgeometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "ergodic_hjb/errors.hpp"

namespace ergodic_hjb {

namespace {

Lagrangian energy_lagrangian(int d, int m) {
  LagrangianConstants c;
  c.normalized = true;
  return Lagrangian::quadratic_plus_potential(
      d, [](std::span<const double>) { return 0.0; }, Vec::Zero(m), Vec::Zero(d), c, "0");
}

void require_driftless(const ControlSystem& system) {
  if (system.kind() != SystemKind::kDriftlessAffine)
    throw ModeError("sub-Riemannian quantities need a driftless system, got " + to_string(system.kind()));
}

Vec uniform_in_ball(int d, double radius, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-radius, radius);
  Vec x(d);
  do {
    for (int i = 0; i < d; ++i) x(i) = u(rng);
  } while (x.norm() > radius);
  return x;
}

}  // namespace

SrEstimate sr_estimate(const ControlSystem& system, const Vec& x, const Vec& y, const SrOptions& options) {
  require_driftless(system);
  const int d = system.dimension(), m = system.control_dimension();
  if (x.size() != d || y.size() != d) throw InputError("point dimension does not match the system");
  if (!(options.horizon > 0.0)) throw InputError("horizon must be positive");

  DirectOptions direct;
  direct.restarts = options.restarts;
  direct.seed = options.seed;
  direct.max_iterations = options.max_iterations;
  direct.penalty_rounds = options.penalty_rounds;
  const auto result = direct_minimize(system, energy_lagrangian(d, m), x, options.horizon,
                                      options.intervals, EndpointPenalty{y, options.mu}, direct);
  if (result.endpoint_residual > options.residual_tol)
    throw ConvergenceError("endpoint missed by " + std::to_string(result.endpoint_residual) +
                               " after penalty continuation",
                           result.endpoint_residual);
  SrEstimate est;
  // cost = 1/2 int_0^t |u|^2; rescaling time to [0, 1] multiplies the energy by t.
  est.energy = 2.0 * options.horizon * result.cost;
  est.distance = std::sqrt(est.energy);
  est.endpoint_residual = result.endpoint_residual;
  est.trajectory = result.trajectory;
  return est;
}

double sr_energy(const ControlSystem& system, const Vec& x, const Vec& y, const SrOptions& options) {
  return sr_estimate(system, x, y, options).energy;
}

double sr_distance(const ControlSystem& system, const Vec& x, const Vec& y, const SrOptions& options) {
  return sr_estimate(system, x, y, options).distance;
}

ControlMesh unit_sphere_mesh(int m, int directions) {
  if (m < 1) throw InputError("control dimension must be positive");
  if (directions < 2) throw InputError("need at least two directions");
  ControlMesh mesh;
  mesh.m = m;
  if (m == 1) {
    mesh.points = {1.0, -1.0};
    return mesh;
  }
  if (m == 2) {
    for (int k = 0; k < directions; ++k) {
      const double a = 2.0 * std::numbers::pi * k / directions;
      mesh.points.push_back(std::cos(a));
      mesh.points.push_back(std::sin(a));
    }
    return mesh;
  }
  // Fibonacci lattice on S^2, padded with zeros for m > 3.
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < directions; ++k) {
    const double z = 1.0 - 2.0 * (k + 0.5) / directions;
    const double r = std::sqrt(1.0 - z * z);
    mesh.points.push_back(r * std::cos(golden * k));
    mesh.points.push_back(r * std::sin(golden * k));
    mesh.points.push_back(z);
    for (int i = 3; i < m; ++i) mesh.points.push_back(0.0);
  }
  return mesh;
}

ValueField sr_distance_field(const ControlSystem& system, const Vec& x0, const Grid& grid,
                             const SolverConfig& config, int directions) {
  require_driftless(system);
  if (x0.size() != grid.dimension()) throw InputError("source point dimension mismatch");
  if (!grid.contains(x0)) throw InputError("source point lies outside the grid");
  const int d = system.dimension(), m = system.control_dimension();
  ControlMesh mesh = unit_sphere_mesh(m, directions);
  const double h = config.dt > 0.0 ? config.dt : default_time_step(system, grid, mesh);
  BellmanOperator op(system, Lagrangian::constant(d, m, 1.0), grid, mesh, config, h,
                     BellmanOperator::Orientation::kForward);
  const std::size_t source = grid.nearest(x0);
  ValueField current(grid, 0.0), next(grid, 0.0);
  double change = std::numeric_limits<double>::infinity();
  for (int it = 0; it < config.max_iterations; ++it) {
    op.apply(current, next);
    next[source] = 0.0;
    if (!next.all_finite()) throw DivergenceError("non-finite distance in sweep " + std::to_string(it + 1));
    change = sup_distance(current, next);
    std::swap(current, next);
    if (change < config.tolerance) return current;
  }
  throw IterationLimitError("distance field did not settle; last change " + std::to_string(change), change);
}

BallBoxReport ball_box_audit(const ControlSystem& system, double radius, int n_pairs, std::uint64_t seed,
                             const BallBoxOptions& options) {
  require_driftless(system);
  if (!(radius > 0.0)) throw InputError("radius must be positive");
  if (n_pairs < 2) throw InputError("need at least two pairs");
  const int d = system.dimension();
  if (options.direction && (options.direction->size() != d || options.direction->norm() == 0.0))
    throw InputError("pair direction must be a nonzero state vector");

  BallBoxReport report;
  report.compact_radius = radius;
  std::mt19937_64 rng(seed);

  // Degree over K: the center plus random points.
  for (int s = 0; s < std::max(1, options.chow_samples); ++s) {
    Vec p = s == 0 ? Vec::Zero(d) : uniform_in_ball(d, radius, rng);
    ChowReport chow = check_chow(system, p, options.max_degree);
    report.degree = std::max(report.degree, chow.degree);
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < n_pairs; ++k) {
    BallBoxPair pair;
    pair.x = uniform_in_ball(d, radius, rng);
    if (options.direction) {
      const double s = radius * std::pow(30.0, -unit(rng));
      pair.y = pair.x + s * options.direction->normalized();
    } else {
      pair.y = uniform_in_ball(d, radius, rng);
    }
    pair.euclidean = (pair.x - pair.y).norm();
    SrOptions sr = options.sr;
    sr.seed = options.sr.seed + static_cast<std::uint64_t>(k);
    pair.distance = sr_distance(system, pair.x, pair.y, sr);
    report.pairs.push_back(std::move(pair));
  }

  const double inv_r = 1.0 / report.degree;
  report.c1 = std::numeric_limits<double>::infinity();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (const auto& p : report.pairs) {
    if (p.euclidean <= 0.0) continue;
    report.c1 = std::min(report.c1, p.distance / p.euclidean);
    report.c2 = std::max(report.c2, p.distance / std::pow(p.euclidean, inv_r));
    if (p.distance > 0.0) {
      const double lx = std::log(p.euclidean), ly = std::log(p.distance);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
      ++n;
    }
  }
  const double denom = n * sxx - sx * sx;
  report.fitted_exponent = n >= 2 && denom > 0.0 ? (n * sxy - sx * sy) / denom
                                                 : std::numeric_limits<double>::quiet_NaN();
  report.worst_violation = -std::numeric_limits<double>::infinity();
  for (const auto& p : report.pairs) {
    const double low = report.c1 * p.euclidean - p.distance;
    const double high = p.distance - report.c2 * std::pow(p.euclidean, inv_r);
    report.worst_violation = std::max({report.worst_violation, low, high});
  }
  return report;
}

}  // namespace ergodic_hjb
