#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ergodic_hjb/grid.hpp"
#include "ergodic_hjb/hjb.hpp"
#include "ergodic_hjb/systems.hpp"
#include "ergodic_hjb/trajectory.hpp"

namespace ergodic_hjb {

/// Settings for the penalty-continuation energy solver.
struct SrOptions {
  int intervals = 32;
  int restarts = 8;
  std::uint64_t seed = 0;
  /// Horizon of the reparametrized problem; the energy is reported on [0, 1]
  /// as horizon * min int_0^horizon |u|^2.
  double horizon = 1.0;
  double mu = 1e3;
  int penalty_rounds = 3;
  int max_iterations = 5000;
  /// Largest accepted endpoint miss |gamma(horizon) - y|.
  double residual_tol = 1e-3;
};

struct SrEstimate {
  double energy = 0.0;
  double distance = 0.0;
  double endpoint_residual = 0.0;
  Trajectory trajectory;  // optimizing curve on [0, horizon]
};

/// Minimizes the energy of horizontal curves from x to y. Throws
/// ConvergenceError (carrying the residual) when the endpoint is missed.
SrEstimate sr_estimate(const ControlSystem& system, const Vec& x, const Vec& y,
                       const SrOptions& options = {});
double sr_energy(const ControlSystem& system, const Vec& x, const Vec& y, const SrOptions& options = {});
/// sqrt(sr_energy).
double sr_distance(const ControlSystem& system, const Vec& x, const Vec& y,
                   const SrOptions& options = {});

/// Minimum time to reach each node from x0 with |u| <= 1, by value iteration
/// of d(x) = min_k { h + I[d](x + h f(x, u_k)) } over `directions` unit
/// controls, with d pinned to 0 at the node nearest x0. The pseudo-time step h
/// is `config.dt` when set, otherwise 0.5 * min spacing / max |f|. Stops when
/// the sup change drops below `config.tolerance`; throws IterationLimitError.
ValueField sr_distance_field(const ControlSystem& system, const Vec& x0, const Grid& grid,
                             const SolverConfig& config, int directions = 32);

/// Unit controls: 2 for m = 1, `directions` equally spaced angles for m = 2,
/// a Fibonacci sphere for m >= 3.
ControlMesh unit_sphere_mesh(int m, int directions);

struct BallBoxOptions {
  SrOptions sr;
  int chow_samples = 50;
  int max_degree = 4;
  /// When set, pairs are (x, x + s * direction) with s log-uniform in
  /// [R / 30, R]; otherwise both points are uniform in B_R.
  std::optional<Vec> direction;
};

struct BallBoxPair {
  Vec x, y;
  double euclidean = 0.0;
  double distance = 0.0;
};

struct BallBoxReport {
  double compact_radius = 0.0;
  int degree = 0;
  double c1 = 0.0;  // max c with c |x - y| <= d
  double c2 = 0.0;  // min c with d <= c |x - y|^(1/degree)
  double fitted_exponent = 0.0;  // least-squares slope of log d against log |x - y|
  double worst_violation = 0.0;  // largest bound excess over all pairs (<= 0 when satisfied)
  std::vector<BallBoxPair> pairs;
};

/// Samples pairs in B_R, estimates d_SR for each and fits the two-sided
/// ball-box bound. The degree is the largest Chow degree over the center of
/// B_R and `chow_samples - 1` random points of B_R.
BallBoxReport ball_box_audit(const ControlSystem& system, double radius, int n_pairs,
                             std::uint64_t seed, const BallBoxOptions& options = {});

}  // namespace ergodic_hjb
