#pragma once

#include <Eigen/SparseCore>

#include <cstdint>
#include <optional>
#include <vector>

#include "ergodic_hjb/control_mesh.hpp"
#include "ergodic_hjb/grid.hpp"
#include "ergodic_hjb/lagrangian.hpp"
#include "ergodic_hjb/systems.hpp"

namespace ergodic_hjb {

struct SolverConfig {
  /// Time step; 0 selects 0.5 * min spacing / max |f| over grid x mesh.
  double dt = 0.0;
  ControlMeshSpec mesh{3.0, 21, true};
  BoundaryRule boundary = BoundaryRule::kExtendLinear;
  double tolerance = 1e-6;
  int max_iterations = 200000;
  int threads = 1;
};

/// 0.5 * min spacing / (max sampled |f| over grid nodes x control mesh).
double default_time_step(const ControlSystem& system, const Grid& grid, const ControlMesh& mesh);

/// The mesh the solvers use: `config.mesh` around the origin plus u* last.
ControlMesh solver_control_mesh(const ControlSystem& system, const Lagrangian& lagrangian,
                                const SolverConfig& config);

/// Control index chosen at each node (lowest index wins ties).
using Policy = std::vector<std::uint16_t>;

/// One semi-Lagrangian step
///
///   out(x) = min_k { dt L(x, u_k) + discount * I[in](x + sign * dt * f(x, u_k)) }
///
/// over the control mesh, with sign = +1 (forward, value functions) or -1
/// (backward, Lax-Oleinik). Node data (velocities, costs) is precomputed once.
class BellmanOperator {
 public:
  enum class Orientation { kForward, kBackward };

  BellmanOperator(const ControlSystem& system, const Lagrangian& lagrangian, const Grid& grid,
                  const SolverConfig& config, double dt, Orientation orientation);
  /// Same, with an explicit control mesh instead of `config.mesh`.
  BellmanOperator(const ControlSystem& system, const Lagrangian& lagrangian, const Grid& grid,
                  ControlMesh mesh, const SolverConfig& config, double dt, Orientation orientation);

  /// Applies one step. `policy` (resized) receives the argmins and
  /// `boundary_hits` counts nodes whose chosen foot point leaves the box.
  void apply(const ValueField& in, ValueField& out, double discount = 1.0, Policy* policy = nullptr,
             std::size_t* boundary_hits = nullptr) const;

  /// Sparse interpolation matrix P with (P v)(n) = I[v](foot(n, policy[n])).
  Eigen::SparseMatrix<double> transition(const Policy& policy) const;
  /// dt * L(x_n, u_{policy[n]}) per node.
  Eigen::VectorXd policy_cost(const Policy& policy) const;
  /// Foot point of node n under control k, in state coordinates.
  Vec foot(std::size_t node, int k) const;
  double running_cost(std::size_t node, int k) const;

  const ControlMesh& mesh() const { return mesh_; }
  const Grid& grid() const { return grid_; }
  double dt() const { return dt_; }
  BoundaryRule boundary() const { return boundary_; }

 private:
  template <int D>
  void sweep(const ValueField& in, ValueField& out, double discount, Policy* policy,
             std::size_t* hits, std::size_t begin, std::size_t end,
             std::vector<double>& scratch) const;
  void foot_grid_coords(std::size_t node, int k, double* s) const;

  Grid grid_;
  ControlMesh mesh_;
  double dt_;
  BoundaryRule boundary_;
  int threads_;
  int d_, m_, k_;
  bool affine_;
  bool separable_;
  // Affine: per node, drift (d) then control matrix (d*m, column-major), both
  // pre-scaled by sign * dt / spacing so they map straight to grid units.
  std::vector<double> node_dynamics_;
  // Generic: per (node, k), displacement in grid units (d).
  std::vector<double> node_velocity_;
  std::vector<double> node_cost_;     // separable: dt * potential(x_n)
  std::vector<double> control_cost_;  // separable: dt * 1/2|u_k - u*|^2
  std::vector<double> controls_t_;    // mesh transposed: controls_t_[i * k + k_index]
  std::vector<double> table_cost_;    // generic: dt * L(x_n, u_k)
};

struct FiniteHorizonResult {
  double dt = 0.0;
  int steps = 0;
  bool dt_adjusted = false;
  std::vector<double> checkpoint_times;
  std::vector<ValueField> fields;  // one per checkpoint
  /// policies[s] is the argmin used for the step producing V_{(s+1) dt};
  /// filled only when requested.
  std::vector<Policy> policies;
  double boundary_fraction = 0.0;  // chosen foot points outside the box / (nodes * steps)
};

/// V_0 = 0, V_{n+1}(x) = min_u { dt L(x,u) + I[V_n](x + dt f(x,u)) }.
/// Returns fields at the requested checkpoints (which must be multiples of
/// the step; the step is reduced so that the largest checkpoint is one).
FiniteHorizonResult solve_finite_horizon(const ControlSystem& system, const Lagrangian& lagrangian,
                                         const Grid& grid, const std::vector<double>& checkpoints,
                                         const SolverConfig& config, bool record_policies = false);

struct DiscountedResult {
  ValueField field;
  double dt = 0.0;
  int policy_iterations = 0;
  int value_iterations = 0;
  double last_change = 0.0;
};

/// Fixed point of v(x) = min_u { dt L(x,u) + e^{-lambda dt} I[v](x + dt f(x,u)) },
/// stopped when a plain Bellman update changes v by less than
/// tolerance * (1 - e^{-lambda dt}). Policy iteration accelerates the search;
/// the stop test is always a plain update. Throws IterationLimitError.
DiscountedResult solve_discounted(const ControlSystem& system, const Lagrangian& lagrangian,
                                  const Grid& grid, double lambda, const SolverConfig& config,
                                  const std::optional<ValueField>& warm_start = std::nullopt);

/// T_t phi by t/dt backward steps; t must be a multiple of dt. Driftless only.
ValueField lax_oleinik_apply(const ControlSystem& system, const Lagrangian& lagrangian,
                             const ValueField& phi, double t, const SolverConfig& config);

/// Step size the solvers would use for `grid` under `config`.
double resolve_time_step(const ControlSystem& system, const Grid& grid, const SolverConfig& config);

struct ResidualReport {
  double sup = 0.0;                    // sup over interior nodes of |phi - T_dt phi| / dt
  ValueField per_node;                 // |phi - T_dt phi| / dt (0 on boundary nodes)
  std::optional<double> hamiltonian_sup;  // sup |H(x, D phi)| by central differences
};

ResidualReport scheme_residual(const ControlSystem& system, const Lagrangian& lagrangian,
                               const ValueField& field, const SolverConfig& config);

}  // namespace ergodic_hjb
