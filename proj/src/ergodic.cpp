#include "ergodic_hjb/ergodic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/SparseLU>

#include "ergodic_hjb/errors.hpp"
#include "ergodic_hjb/trajectory.hpp"

namespace ergodic_hjb {

namespace {

double eval_joint(const Lagrangian& l, const Vec& z) {
  const auto d = static_cast<std::size_t>(l.state_dimension());
  const auto m = static_cast<std::size_t>(l.control_dimension());
  return l.eval_raw({z.data(), d}, {z.data() + d, m});
}

Vec uniform_in_ball(int d, double radius, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-radius, radius);
  Vec x(d);
  do {
    for (int i = 0; i < d; ++i) x(i) = u(rng);
  } while (x.norm() > radius);
  return x;
}

void check_probes(const Grid& grid, const std::vector<Vec>& probes) {
  if (probes.empty()) throw InputError("at least one probe is required");
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const Vec& p = probes[i];
    if (p.size() != grid.dimension()) throw InputError("probe " + std::to_string(i) + " has the wrong dimension");
    for (int k = 0; k < grid.dimension(); ++k) {
      const double lo = grid.lower()[static_cast<std::size_t>(k)], hi = grid.upper()[static_cast<std::size_t>(k)];
      if (!(p(k) > lo && p(k) < hi))
        throw InputError("probe " + std::to_string(i) + " is not inside the grid interior");
    }
  }
}

template <typename Fn>
void for_nodes_in_ball(const Grid& grid, double radius, Fn&& fn) {
  double x[kMaxDim];
  for (std::size_t n = 0; n < grid.size(); ++n) {
    grid.node_into(n, x);
    double r2 = 0.0;
    for (int k = 0; k < grid.dimension(); ++k) r2 += x[k] * x[k];
    if (r2 <= radius * radius * (1.0 + 1e-12)) fn(n);
  }
}

}  // namespace

double mane_closed_form(const Lagrangian& lagrangian, double box_half_width, int n_samples,
                        std::uint64_t seed) {
  if (lagrangian.kind() == LagrangianKind::kQuadraticPlusPotential) {
    const Vec& xs = lagrangian.x_star();
    return lagrangian.potential({xs.data(), static_cast<std::size_t>(xs.size())});
  }
  if (n_samples < 1) throw InputError("need at least one sample");
  const int n = lagrangian.state_dimension() + lagrangian.control_dimension();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-box_half_width, box_half_width);
  Vec best(n), z(n);
  double best_value = std::numeric_limits<double>::infinity();
  for (int s = 0; s < n_samples; ++s) {
    for (int i = 0; i < n; ++i) z(i) = u(rng);
    const double v = eval_joint(lagrangian, z);
    if (v < best_value) {
      best_value = v;
      best = z;
    }
  }
  // Polish with finite-difference gradient descent and Armijo backtracking.
  const double h = 1e-6;
  double step = 1.0;
  for (int it = 0; it < 2000; ++it) {
    Vec g(n);
    for (int i = 0; i < n; ++i) {
      Vec a = best, b = best;
      a(i) += h;
      b(i) -= h;
      g(i) = (eval_joint(lagrangian, a) - eval_joint(lagrangian, b)) / (2.0 * h);
    }
    const double gg = g.squaredNorm();
    if (gg < 1e-24) break;
    step = std::min(1.0, 2.0 * step);
    bool moved = false;
    while (step > 1e-16) {
      Vec trial = best - step * g;
      const double v = eval_joint(lagrangian, trial);
      if (v <= best_value - 1e-4 * step * gg) {
        best = trial;
        best_value = v;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return best_value;
}

Lagrangian normalized(const Lagrangian& lagrangian, double box_half_width, int n_samples,
                      std::uint64_t seed) {
  const double mane = mane_closed_form(lagrangian, box_half_width, n_samples, seed);
  return mane == 0.0 ? lagrangian : lagrangian.shifted(-mane);
}

std::vector<Vec> default_probes(int d, double radius) {
  std::vector<Vec> probes{Vec::Zero(d)};
  for (double frac : {0.5, 1.0})
    for (int k = 0; k < d; ++k)
      for (double sign : {1.0, -1.0}) {
        Vec p = Vec::Zero(d);
        p(k) = sign * frac * radius;
        probes.push_back(p);
      }
  return probes;
}

double ProbeSeries::sup() const { return *std::max_element(values.begin(), values.end()); }
double ProbeSeries::inf() const { return *std::min_element(values.begin(), values.end()); }

std::vector<ProbeSeries> horizon_series(const FiniteHorizonResult& run, const std::vector<Vec>& probes) {
  std::vector<ProbeSeries> out;
  for (std::size_t c = 0; c < run.fields.size(); ++c) {
    const double t = run.checkpoint_times[c];
    if (t <= 0.0) continue;
    ProbeSeries s;
    s.parameter = t;
    for (const auto& p : probes) s.values.push_back(run.fields[c].interpolate(p) / t);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<ProbeSeries> estimate_mane_horizon(const ControlSystem& system, const Lagrangian& lagrangian,
                                               const Grid& grid, const std::vector<Vec>& probes,
                                               const std::vector<double>& horizons,
                                               const SolverConfig& config) {
  check_probes(grid, probes);
  for (double t : horizons)
    if (!(t > 0.0)) throw InputError("horizons must be positive");
  return horizon_series(solve_finite_horizon(system, lagrangian, grid, horizons, config), probes);
}

DiscountedSequence solve_discounted_sequence(const ControlSystem& system, const Lagrangian& lagrangian,
                                             const Grid& grid, const std::vector<double>& lambdas,
                                             const SolverConfig& config) {
  if (lambdas.empty()) throw InputError("at least one discount rate is required");
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] > 0.0)) throw InputError("discount rates must be positive");
    if (i > 0 && !(lambdas[i] < lambdas[i - 1])) throw InputError("discount rates must be decreasing");
  }
  DiscountedSequence seq;
  std::optional<ValueField> warm;
  for (double lambda : lambdas) {
    DiscountedResult r = solve_discounted(system, lagrangian, grid, lambda, config, warm);
    warm = r.field;
    seq.lambdas.push_back(lambda);
    seq.fields.push_back(std::move(r.field));
    r.field = ValueField();
    seq.runs.push_back(std::move(r));
  }
  return seq;
}

std::vector<ProbeSeries> discounted_series(const DiscountedSequence& seq, const std::vector<Vec>& probes) {
  std::vector<ProbeSeries> out;
  for (std::size_t i = 0; i < seq.lambdas.size(); ++i) {
    ProbeSeries s;
    s.parameter = seq.lambdas[i];
    for (const auto& p : probes) s.values.push_back(seq.lambdas[i] * seq.fields[i].interpolate(p));
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<ProbeSeries> estimate_mane_discounted(const ControlSystem& system, const Lagrangian& lagrangian,
                                                  const Grid& grid, const std::vector<Vec>& probes,
                                                  const std::vector<double>& lambdas,
                                                  const SolverConfig& config) {
  check_probes(grid, probes);
  return discounted_series(solve_discounted_sequence(system, lagrangian, grid, lambdas, config), probes);
}

std::vector<TauberianGap> tauberian_gaps(const ErgodicEstimate& estimate) {
  std::vector<TauberianGap> gaps;
  for (const auto& h : estimate.horizon) {
    for (const auto& d : estimate.discounted) {
      if (std::abs(h.parameter * d.parameter - 1.0) > 1e-9) continue;
      if (h.values.size() != d.values.size()) throw InputError("series have different probe counts");
      TauberianGap g{h.parameter, d.parameter, 0.0};
      for (std::size_t i = 0; i < h.values.size(); ++i)
        g.gap = std::max(g.gap, std::abs(d.values[i] - h.values[i]));
      gaps.push_back(g);
    }
  }
  return gaps;
}

double tauberian_check(const ErgodicEstimate& estimate) {
  const auto gaps = tauberian_gaps(estimate);
  if (gaps.empty()) throw InputError("no (T, lambda) pair with lambda * T = 1");
  double worst = 0.0;
  for (const auto& g : gaps) worst = std::max(worst, g.gap);
  return worst;
}

double discounted_equibound(const DiscountedSequence& seq, double radius) {
  double sup = 0.0;
  for (std::size_t i = 0; i < seq.fields.size(); ++i)
    for_nodes_in_ball(seq.fields[i].grid(), radius,
                      [&](std::size_t n) { sup = std::max(sup, seq.lambdas[i] * std::abs(seq.fields[i][n])); });
  return sup;
}

CorrectorExtraction extract_corrector(const ControlSystem& system, const Lagrangian& lagrangian,
                                      const Grid& grid, const std::vector<double>& lambdas,
                                      const SolverConfig& config, const CorrectorOptions& options) {
  CorrectorExtraction out;
  out.mane_shift = mane_closed_form(lagrangian, options.box_half_width, 20000, options.seed);
  const Lagrangian l = out.mane_shift == 0.0 ? lagrangian : lagrangian.shifted(-out.mane_shift);
  out.sequence = solve_discounted_sequence(system, l, grid, lambdas, config);
  for (std::size_t i = 1; i < out.sequence.fields.size(); ++i) {
    out.cauchy_gaps.push_back(sup_distance(out.sequence.fields[i], out.sequence.fields[i - 1]));
    if (i >= 2 && !(out.cauchy_gaps[i - 1] < out.cauchy_gaps[i - 2])) out.cauchy_trend = false;
  }
  out.chi = out.sequence.fields.back();

  if (system.kind() != SystemKind::kDriftlessAffine || options.lipschitz_pairs <= 0) return out;
  // Degree over B_R: random samples almost surely miss singular sets, so the center counts too.
  out.degree = check_chow(system, Vec::Zero(grid.dimension()), 4).degree;
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<int> cells(1, 4), axis(0, grid.dimension() - 1), sign(0, 1);
  for (int s = 0; s < options.lipschitz_pairs; ++s) {
    const std::size_t a = grid.nearest(uniform_in_ball(grid.dimension(), options.sample_radius, rng));
    auto idx = grid.multi_index(a);
    const int k = axis(rng);
    const int shift = cells(rng) * (sign(rng) ? 1 : -1);
    idx[static_cast<std::size_t>(k)] =
        std::clamp(idx[static_cast<std::size_t>(k)] + shift, 0, grid.nodes()[static_cast<std::size_t>(k)] - 1);
    const std::size_t b = grid.flat_index(idx);
    if (a == b) continue;
    LipschitzSample sample;
    sample.x = grid.node(a);
    sample.y = grid.node(b);
    sample.difference = std::abs(out.chi[a] - out.chi[b]);
    sample.euclidean = (sample.x - sample.y).norm();
    SrOptions sr = options.sr;
    sr.seed = options.sr.seed + static_cast<std::uint64_t>(s);
    sample.sr_distance = sr_distance(system, sample.x, sample.y, sr);
    out.degree = std::max({out.degree, check_chow(system, sample.x, 4).degree,
                           check_chow(system, sample.y, 4).degree});
    out.lipschitz_samples.push_back(std::move(sample));
  }
  for (const auto& s : out.lipschitz_samples) {
    if (s.sr_distance > 0.0) out.sr_lipschitz = std::max(out.sr_lipschitz, s.difference / s.sr_distance);
    out.holder_constant =
        std::max(out.holder_constant, s.difference / std::pow(s.euclidean, 1.0 / out.degree));
  }
  return out;
}

namespace {

double step_residual(const BellmanOperator& op, const ValueField& phi, ValueField& scratch) {
  op.apply(phi, scratch);
  return sup_distance(phi, scratch);
}

// Policy evaluation for phi = T_dt phi with a small discount e^{-eps dt}:
// cycles that never reach a free node stay solvable. Nodes whose control is a
// zero-cost self-loop keep their current value.
bool evaluate_policy(const BellmanOperator& op, const Policy& policy, double eps, ValueField& phi) {
  const auto nn = static_cast<Eigen::Index>(op.grid().size());
  const double gamma = std::exp(-eps * op.dt());
  const Eigen::SparseMatrix<double, Eigen::RowMajor> p = op.transition(policy);
  Eigen::VectorXd rhs = op.policy_cost(policy);
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(p.nonZeros() + nn));
  using It = Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator;
  for (Eigen::Index n = 0; n < nn; ++n) {
    bool self_loop = rhs(n) <= 1e-12 * op.dt();
    for (It e(p, n); e; ++e)
      if (e.value() != 0.0 && (e.col() != n || e.value() != 1.0)) self_loop = false;
    entries.emplace_back(n, n, 1.0);
    if (self_loop) {
      rhs(n) = phi[static_cast<std::size_t>(n)];
      continue;
    }
    for (It e(p, n); e; ++e) entries.emplace_back(n, e.col(), -gamma * e.value());
  }
  Eigen::SparseMatrix<double> a(nn, nn);
  a.setFromTriplets(entries.begin(), entries.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) return false;
  const Eigen::VectorXd w = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !w.allFinite()) return false;
  std::copy(w.data(), w.data() + nn, phi.values().begin());
  return true;
}

// Howard iteration for phi = T_dt phi, continued over shrinking discounts
// (the discount biases the result by about eps * value * exit time). Keeps
// the candidate with the smallest one-step change and returns false, leaving
// phi untouched, when nothing beats the starting field.
bool policy_jump(const BellmanOperator& op, ValueField& phi, int& iterations) {
  const Grid& grid = op.grid();
  ValueField candidate = phi, scratch(grid, 0.0), best = phi;
  double best_residual = step_residual(op, phi, scratch);
  const double start = best_residual;
  Policy policy, previous;
  for (double eps : {1e-4, 1e-6, 1e-8}) {
    double last = std::numeric_limits<double>::infinity();
    int stalls = 0;
    previous.clear();
    for (int it = 0; it < 30 && stalls < 2; ++it) {
      op.apply(candidate, scratch, 1.0, &policy);
      if (policy == previous) break;
      if (!evaluate_policy(op, policy, eps, candidate)) {
        candidate = best;
        break;
      }
      previous = policy;
      ++iterations;
      const double r = step_residual(op, candidate, scratch);
      if (r < best_residual) {
        best_residual = r;
        best = candidate;
      }
      stalls = r < 0.9 * last ? 0 : stalls + 1;
      last = r;
    }
    candidate = best;
  }
  if (!(best_residual < start)) return false;
  phi = std::move(best);
  return true;
}

}  // namespace

FixedPointResult lax_oleinik_fixed_point(const ControlSystem& system, const Lagrangian& lagrangian,
                                         const ValueField& chi, const SolverConfig& config,
                                         const FixedPointOptions& options) {
  if (system.kind() != SystemKind::kDriftlessAffine)
    throw ModeError("the Lax-Oleinik scheme is implemented for driftless systems");
  if (!(options.t_step > 0.0) || !(options.max_time >= options.t_step))
    throw InputError("need 0 < t_step <= max_time");
  const Grid& grid = chi.grid();
  const double dt = resolve_time_step(system, grid, config);
  const double ratio = options.t_step / dt;
  const int steps = static_cast<int>(std::lround(ratio));
  if (steps < 1 || std::abs(ratio - steps) > 1e-7 * ratio)
    throw InputError("t_step must be a multiple of dt");
  const double slack = options.monotone_slack > 0.0 ? options.monotone_slack : 2.0 * config.tolerance;
  BellmanOperator op(system, lagrangian, grid, config, dt, BellmanOperator::Orientation::kBackward);

  auto ball_stats = [&](const ValueField& f, FixedPointResult& r) {
    double sup = 0.0, mod = 0.0;
    for_nodes_in_ball(grid, options.radius, [&](std::size_t n) {
      sup = std::max(sup, std::abs(f[n]));
      auto idx = grid.multi_index(n);
      for (int k = 0; k < grid.dimension(); ++k)
        if (idx[static_cast<std::size_t>(k)] + 1 < grid.nodes()[static_cast<std::size_t>(k)])
          mod = std::max(mod, std::abs(f[n + grid.strides()[static_cast<std::size_t>(k)]] - f[n]));
    });
    r.sup_on_ball.push_back(sup);
    r.modulus.push_back(mod);
  };

  FixedPointResult r;
  bool jump_tried = false;
  ValueField phi = chi, next(grid, 0.0), scratch(grid, 0.0);
  r.times.push_back(0.0);
  ball_stats(phi, r);
  const int max_iterations = static_cast<int>(std::floor(options.max_time / options.t_step + 1e-9));
  for (int it = 0; it < max_iterations; ++it) {
    next = phi;
    for (int s = 0; s < steps; ++s) {
      op.apply(next, scratch);
      if (!scratch.all_finite()) throw DivergenceError("non-finite Lax-Oleinik iterate");
      std::swap(next, scratch);
    }
    double change = 0.0, decrease = -std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < grid.size(); ++n) {
      change = std::max(change, std::abs(next[n] - phi[n]));
      decrease = std::max(decrease, phi[n] - next[n]);
    }
    r.changes.push_back(change);
    r.decreases.push_back(decrease);
    r.worst_decrease = std::max(r.worst_decrease, decrease);
    if (decrease > slack)
      throw ConsistencyError("Lax-Oleinik iterate decreased by " + std::to_string(decrease) + " at t = " +
                             std::to_string((it + 1) * options.t_step) + " (allowed " + std::to_string(slack) +
                             "); refine the grid or the time step");
    ++r.iterations;
    if (change < options.tolerance) {
      // phi is the returned fixed point and `change` is exactly its gap.
      r.converged = true;
      r.fixed_point_gap = change;
      r.chi_bar = std::move(phi);
      return r;
    }
    std::swap(phi, next);
    const double t = (it + 1) * options.t_step;
    if (!jump_tried && options.accelerate_after >= 0.0 && t >= options.accelerate_after - 1e-12) {
      jump_tried = true;
      if (policy_jump(op, phi, r.policy_iterations)) r.accelerated_at = t;
    }
    r.times.push_back(t);
    ball_stats(phi, r);
  }
  // Report the gap of the returned field: one more application.
  ValueField probe = phi;
  for (int s = 0; s < steps; ++s) {
    op.apply(probe, scratch);
    std::swap(probe, scratch);
  }
  r.fixed_point_gap = sup_distance(probe, phi);
  r.chi_bar = std::move(phi);
  return r;
}

DominationReport domination_check(const ControlSystem& system, const Lagrangian& lagrangian,
                                  const ValueField& phi, const DominationOptions& options) {
  const Grid& grid = phi.grid();
  const int d = system.dimension(), m = system.control_dimension();
  if (grid.dimension() != d) throw InputError("field and system dimensions differ");
  if (options.trajectories < 1 || options.intervals < 1 || options.substeps < 1)
    throw InputError("domination sampling counts must be positive");
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> noise(0.0, options.control_scale);
  const int n = options.intervals * options.substeps;
  const auto t = uniform_time_grid(options.duration, n);
  DominationReport report;
  while (report.trajectories < options.trajectories) {
    if (report.rejected > 100 * options.trajectories)
      throw InputError("random trajectories keep leaving the grid; shrink start_radius or duration");
    const Vec x0 = uniform_in_ball(d, options.start_radius, rng);
    Mat u(m, n);
    for (int piece = 0; piece < options.intervals; ++piece) {
      Vec c = lagrangian.u_star();
      for (int j = 0; j < m; ++j) c(j) += noise(rng);
      for (int s = 0; s < options.substeps; ++s) u.col(piece * options.substeps + s) = c;
    }
    Trajectory traj = integrate(system, x0, u, t);
    bool inside = true;
    for (int k = 0; k <= n && inside; ++k) inside = grid.contains(traj.states.col(k));
    if (!inside) {
      ++report.rejected;
      continue;
    }
    const double running = cost(lagrangian, traj);
    const double excess = phi.interpolate(traj.final_state()) - phi.interpolate(x0) - running;
    report.worst = std::max(report.worst, excess);
    if (excess > options.tolerance) ++report.violations;
    ++report.trajectories;
  }
  return report;
}

DiagnosticsReport trajectory_diagnostics(const ControlSystem& system, const Lagrangian& lagrangian,
                                         const FiniteHorizonResult& run, const SolverConfig& config,
                                         double horizon, const std::vector<Vec>& starts, double radius) {
  const double ratio = horizon / run.dt;
  const int steps = static_cast<int>(std::lround(ratio));
  if (steps < 1 || std::abs(ratio - steps) > 1e-7 * ratio) throw InputError("horizon is not a multiple of dt");
  if (static_cast<int>(run.policies.size()) < steps) throw InputError("run does not hold enough policies");
  const ValueField* field = nullptr;
  for (std::size_t c = 0; c < run.fields.size(); ++c)
    if (std::abs(run.checkpoint_times[c] - horizon) <= 1e-9 * horizon) field = &run.fields[c];
  if (field == nullptr) throw InputError("run has no field at the requested horizon");

  const Grid& grid = field->grid();
  const ControlMesh mesh = solver_control_mesh(system, lagrangian, config);
  const double k_radius = lagrangian.constants().k_radius;
  const Vec& u_star = lagrangian.u_star();

  DiagnosticsReport rep;
  rep.horizon = horizon;
  rep.radius = radius;
  rep.starts = starts;
  for (const auto& x0 : starts) {
    Vec x = x0;
    int outside = 0;
    double energy = 0.0, bound = x.norm();
    for (int s = 0; s < steps; ++s) {
      const Policy& policy = run.policies[static_cast<std::size_t>(steps - s - 1)];
      const Vec u = mesh.control(policy[grid.nearest(x)]);
      if (x.norm() > k_radius) ++outside;
      energy += run.dt * (u - u_star).squaredNorm();
      x += run.dt * system.eval(x, u);
      bound = std::max(bound, x.norm());
    }
    rep.excursion_time = std::max(rep.excursion_time, outside * run.dt);
    rep.control_energy = std::max(rep.control_energy, energy);
    rep.trajectory_bound = std::max(rep.trajectory_bound, bound);
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for_nodes_in_ball(grid, radius, [&](std::size_t n) {
    lo = std::min(lo, (*field)[n]);
    hi = std::max(hi, (*field)[n]);
  });
  rep.oscillation = hi - lo;
  return rep;
}

double relative_change(double a, double b, double floor) {
  return std::abs(b - a) / std::max(std::abs(a), floor);
}

}  // namespace ergodic_hjb
