#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "ergodic_hjb/lagrangian.hpp"
#include "ergodic_hjb/systems.hpp"

namespace ergodic_hjb {

/// Sampled trajectory-control pair with piecewise-constant control.
struct Trajectory {
  std::vector<double> times;  // t_0 < ... < t_N
  Mat states;                 // d x (N+1)
  Mat midpoints;              // d x N, state at the middle of each interval (may be empty)
  Mat controls;               // m x N, control[k] acts on [t_k, t_{k+1})
  double cost = 0.0;

  int intervals() const { return static_cast<int>(controls.cols()); }
  Vec state(int k) const { return states.col(k); }
  Vec final_state() const { return states.col(states.cols() - 1); }
};

std::vector<double> uniform_time_grid(double t_end, int intervals, double t_start = 0.0);

/// RK4 with the control frozen on each interval. Throws DivergenceError on a
/// non-finite state, naming the step.
Trajectory integrate(const ControlSystem& system, const Vec& x0, const Mat& controls,
                     const std::vector<double>& t_grid);

/// Simpson's rule on each interval (endpoints plus stored midpoint), which
/// handles control jumps at grid nodes. Without midpoints it falls back to
/// composite Simpson over the nodes (trapezoid on an odd interval count).
/// Stores the result in `traj.cost` and returns it.
double cost(const Lagrangian& lagrangian, Trajectory& traj);

/// One RK4 step of length h from x under control u.
Vec rk4_step(const ControlSystem& system, const Vec& x, const Vec& u, double h);

enum class GradientMode { kAdjoint, kFiniteDifference };

struct EndpointPenalty {
  Vec target;
  double mu = 1e2;  // initial penalty weight; multiplied by `mu_growth` each round
};

struct DirectOptions {
  int restarts = 8;
  std::uint64_t seed = 0;
  double init_scale = 0.5;
  int max_iterations = 5000;
  double rel_tol = 1e-8;
  int stall_window = 20;
  int penalty_rounds = 3;
  double mu_growth = 10.0;
  GradientMode gradient = GradientMode::kAdjoint;
  /// Optional warm start (m x N); used as the first initialization when given.
  std::optional<Mat> initial_controls;
};

struct DirectResult {
  Trajectory trajectory;
  double cost = 0.0;        // running cost only
  double objective = 0.0;   // cost plus final penalty term
  double endpoint_residual = 0.0;
  double final_mu = 0.0;
  int best_restart = 0;
  int iterations = 0;
};

/// Minimizes the running cost (plus mu |x(T) - y|^2 when an endpoint is given)
/// over N piecewise-constant controls. Multi-start, gradient descent with
/// Barzilai-Borwein steps and Armijo backtracking. An upper bound on V_T(x0).
DirectResult direct_minimize(const ControlSystem& system, const Lagrangian& lagrangian,
                             const Vec& x0, double horizon, int intervals,
                             const std::optional<EndpointPenalty>& endpoint,
                             const DirectOptions& options = {});

/// Objective and gradient of the discretized problem for fixed controls;
/// exposed so the two gradient routes can be compared directly.
struct ObjectiveEval {
  double value = 0.0;
  Mat gradient;  // m x N
};
ObjectiveEval direct_objective(const ControlSystem& system, const Lagrangian& lagrangian,
                               const Vec& x0, const std::vector<double>& t_grid, const Mat& controls,
                               const std::optional<EndpointPenalty>& endpoint, GradientMode mode);

/// Measured growth constants of one trajectory.
struct TrajectoryBounds {
  double gronwall_ratio = 0.0;  // max_k |x_k| / Gronwall bound; <= 1 expected
  double kappa = 0.0;           // (1 + max|x|)/(1 + |x0|)
  double holder_ratio = 0.0;    // max |x(t2)-x(t1)| / (c_f kappa (1+|x0|) |u|_2 |t2-t1|^1/2)
  double control_l2 = 0.0;      // |u|_2 over the horizon
  double control_sup = 0.0;
  double state_sup = 0.0;
};
TrajectoryBounds trajectory_bounds(const ControlSystem& system, const Trajectory& traj);

/// CSV columns: t, x_1..x_d, u_1..u_m, running_cost. The final row repeats
/// the last control.
void write_trajectory_csv(std::ostream& out, const Lagrangian& lagrangian, const Trajectory& traj);

}  // namespace ergodic_hjb
