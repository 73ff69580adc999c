#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ergodic_hjb/grid.hpp"
#include "ergodic_hjb/hjb.hpp"
#include "ergodic_hjb/lagrangian.hpp"
#include "ergodic_hjb/srgeometry.hpp"
#include "ergodic_hjb/systems.hpp"

namespace ergodic_hjb {

/// min L over (x, u). The quadratic kind returns L(x*, u*) directly; the
/// generic kind takes the best of `n_samples` uniform samples in
/// [-h, h]^(d+m) and polishes it by finite-difference gradient descent.
double mane_closed_form(const Lagrangian& lagrangian, double box_half_width, int n_samples,
                        std::uint64_t seed);

/// L - mane_closed_form(L), so that the critical value is zero.
Lagrangian normalized(const Lagrangian& lagrangian, double box_half_width, int n_samples = 20000,
                      std::uint64_t seed = 0);

/// Origin plus +-R/2 and +-R along each axis (9 points in the plane).
std::vector<Vec> default_probes(int d, double radius);

struct ProbeSeries {
  double parameter = 0.0;      // T or lambda
  std::vector<double> values;  // V_T(p)/T or lambda v_lambda(p), one per probe
  double sup() const;
  double inf() const;
  double spread() const { return sup() - inf(); }
};

struct ErgodicEstimate {
  std::vector<Vec> probes;
  std::vector<ProbeSeries> horizon;     // one per T
  std::vector<ProbeSeries> discounted;  // one per lambda
  std::optional<double> closed_form;
};

/// V_T(p)/T at every probe for each T, from one finite-horizon run.
std::vector<ProbeSeries> estimate_mane_horizon(const ControlSystem& system, const Lagrangian& lagrangian,
                                               const Grid& grid, const std::vector<Vec>& probes,
                                               const std::vector<double>& horizons,
                                               const SolverConfig& config);
/// Same, from fields that were already computed (checkpoint times in `run`).
std::vector<ProbeSeries> horizon_series(const FiniteHorizonResult& run, const std::vector<Vec>& probes);

/// v_lambda for a decreasing lambda sequence; each solve warm-starts from the
/// previous field.
struct DiscountedSequence {
  std::vector<double> lambdas;
  std::vector<ValueField> fields;
  std::vector<DiscountedResult> runs;  // solver statistics (fields moved out)
};
DiscountedSequence solve_discounted_sequence(const ControlSystem& system, const Lagrangian& lagrangian,
                                             const Grid& grid, const std::vector<double>& lambdas,
                                             const SolverConfig& config);

std::vector<ProbeSeries> estimate_mane_discounted(const ControlSystem& system, const Lagrangian& lagrangian,
                                                  const Grid& grid, const std::vector<Vec>& probes,
                                                  const std::vector<double>& lambdas,
                                                  const SolverConfig& config);
std::vector<ProbeSeries> discounted_series(const DiscountedSequence& seq, const std::vector<Vec>& probes);

/// |lambda v_lambda(p) - V_T(p)/T| maximized over probes, for each pair with
/// lambda * T = 1 (in horizon order).
struct TauberianGap {
  double horizon = 0.0;
  double lambda = 0.0;
  double gap = 0.0;
};
std::vector<TauberianGap> tauberian_gaps(const ErgodicEstimate& estimate);
/// Largest gap over all matched pairs; throws InputError when none match.
double tauberian_check(const ErgodicEstimate& estimate);

/// sup over the sequence and the grid nodes in B_R of lambda |v_lambda|.
double discounted_equibound(const DiscountedSequence& seq, double radius);

struct LipschitzSample {
  Vec x, y;
  double difference = 0.0;  // |chi(x) - chi(y)|
  double sr_distance = 0.0;
  double euclidean = 0.0;
};

struct CorrectorExtraction {
  ValueField chi;
  DiscountedSequence sequence;
  std::vector<double> cauchy_gaps;  // sup |v_{k+1} - v_k| for consecutive lambdas
  bool cauchy_trend = true;         // gaps strictly decreasing
  std::vector<LipschitzSample> lipschitz_samples;
  double sr_lipschitz = 0.0;  // max difference / d_SR over the samples
  double holder_constant = 0.0;  // max difference / |x - y|^(1/degree)
  int degree = 1;             // Chow degree at the center of B_R and the sample points
  double mane_shift = 0.0;    // value subtracted from L before solving
};

struct CorrectorOptions {
  double box_half_width = 2.0;  // sampling box for the mane shift
  double sample_radius = 1.0;   // Lipschitz samples are drawn in B_R
  int lipschitz_pairs = 8;
  SrOptions sr;
  std::uint64_t seed = 0;
};

/// chi = v_lambda for the smallest lambda, after normalizing L. The Cauchy
/// trend is reported, not enforced.
CorrectorExtraction extract_corrector(const ControlSystem& system, const Lagrangian& lagrangian,
                                      const Grid& grid, const std::vector<double>& lambdas,
                                      const SolverConfig& config, const CorrectorOptions& options = {});

struct FixedPointOptions {
  double t_step = 0.5;
  double max_time = 200.0;
  double tolerance = 1e-4;  // stop once sup |T_step phi - phi| is below this
  /// Allowed decrease between iterates before the run is declared
  /// inconsistent; defaults to 2 * config.tolerance when <= 0.
  double monotone_slack = 0.0;
  double radius = 1.0;  // B_R for the per-iterate bound and modulus records
  /// After this much plain iteration, jump ahead by policy iteration on
  /// phi = T_dt phi (nodes with a free self-loop keep their value), then
  /// resume plain iteration. Negative disables the jump.
  double accelerate_after = 5.0;
};

struct FixedPointResult {
  ValueField chi_bar;
  double fixed_point_gap = 0.0;  // sup |T_step chi_bar - chi_bar|
  bool converged = false;
  int iterations = 0;
  std::vector<double> times;          // t of each iterate T_t chi
  std::vector<double> changes;        // sup |T_{t+step} chi - T_t chi|
  std::vector<double> decreases;      // max (T_t chi - T_{t+step} chi), <= 0 when monotone
  std::vector<double> sup_on_ball;    // sup |T_t chi| over nodes in B_R
  std::vector<double> modulus;        // max adjacent-node difference over nodes in B_R
  double worst_decrease = 0.0;
  /// Time at which the policy-iteration jump was taken; negative if never.
  double accelerated_at = -1.0;
  int policy_iterations = 0;
};

/// Iterates T_{t_step} from chi until the change drops below the tolerance or
/// max_time is reached. Throws ConsistencyError when an iterate decreases
/// somewhere by more than the monotone slack.
FixedPointResult lax_oleinik_fixed_point(const ControlSystem& system, const Lagrangian& lagrangian,
                                         const ValueField& chi, const SolverConfig& config,
                                         const FixedPointOptions& options = {});

struct DominationOptions {
  int trajectories = 200;
  double duration = 1.0;
  int intervals = 10;      // piecewise-constant control pieces
  int substeps = 10;       // RK4 steps per piece
  double control_scale = 1.0;  // controls are u* + N(0, scale^2)
  double start_radius = 1.0;   // starting points uniform in B_R
  double tolerance = 1e-3;
  std::uint64_t seed = 0;
};

struct DominationReport {
  int trajectories = 0;
  int violations = 0;
  double worst = -std::numeric_limits<double>::infinity();  // max of phi(b) - phi(a) - int L
  int rejected = 0;  // samples that left the grid and were redrawn
};

/// Samples random trajectories inside the grid and checks
/// phi(gamma(b)) - phi(gamma(a)) <= int_a^b L + tolerance.
DominationReport domination_check(const ControlSystem& system, const Lagrangian& lagrangian,
                                  const ValueField& phi, const DominationOptions& options = {});

/// Closed-loop trajectory diagnostics from recorded grid argmins.
struct DiagnosticsReport {
  double horizon = 0.0;
  double radius = 0.0;
  double excursion_time = 0.0;   // M_R: max time outside K
  double control_energy = 0.0;   // P_R: max int |u - u*|^2
  double trajectory_bound = 0.0; // Q_R: max |gamma(t)|
  double oscillation = 0.0;      // K(R): max - min of V_T over nodes in B_R
  std::vector<Vec> starts;
};

/// Follows the nearest-node feedback u = mesh[policy] from each start with
/// explicit Euler steps of the scheme's dt. `run` must hold policies for at
/// least horizon / dt steps and a field at `horizon`.
DiagnosticsReport trajectory_diagnostics(const ControlSystem& system, const Lagrangian& lagrangian,
                                         const FiniteHorizonResult& run, const SolverConfig& config,
                                         double horizon, const std::vector<Vec>& starts, double radius);

/// Relative change |b - a| / max(|a|, floor).
double relative_change(double a, double b, double floor = 1e-12);

}  // namespace ergodic_hjb
