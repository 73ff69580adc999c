#include "ergodic_hjb/hjb.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <thread>

#include "ergodic_hjb/errors.hpp"

namespace ergodic_hjb {

namespace {

template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || n < 4096) {
    fn(std::size_t{0}, n, std::size_t{0});
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    std::size_t begin = w * chunk, end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end, w] { fn(begin, end, w); });
  }
  for (auto& t : pool) t.join();
}

void check_compatible(const ControlSystem& system, const Lagrangian& lagrangian, const Grid& grid) {
  if (grid.dimension() != system.dimension())
    throw InputError("grid dimension " + std::to_string(grid.dimension()) +
                     " does not match system dimension " + std::to_string(system.dimension()));
  if (grid.dimension() > 3) throw InputError("grid solvers support d <= 3");
  if (lagrangian.state_dimension() != system.dimension() ||
      lagrangian.control_dimension() != system.control_dimension())
    throw InputError("lagrangian and system dimensions differ");
}

}  // namespace

ControlMesh solver_control_mesh(const ControlSystem& system, const Lagrangian& lagrangian,
                                const SolverConfig& config) {
  const int m = system.control_dimension();
  return build_control_mesh(m, config.mesh, Vec::Zero(m), {lagrangian.u_star()});
}

double default_time_step(const ControlSystem& system, const Grid& grid, const ControlMesh& mesh) {
  const int d = system.dimension(), m = system.control_dimension();
  const std::size_t stride = std::max<std::size_t>(1, grid.size() / 20000);
  double vmax = 0.0;
  std::array<double, kMaxDim> x, v;
  for (std::size_t n = 0; n < grid.size(); n += stride) {
    grid.node_into(n, x.data());
    for (int k = 0; k < mesh.size(); ++k) {
      system.eval_into({x.data(), static_cast<std::size_t>(d)}, {mesh[k], static_cast<std::size_t>(m)},
                       {v.data(), static_cast<std::size_t>(d)});
      double s = 0.0;
      for (int i = 0; i < d; ++i) s += v[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(i)];
      vmax = std::max(vmax, std::sqrt(s));
    }
  }
  if (vmax == 0.0) return grid.min_spacing();
  return 0.5 * grid.min_spacing() / vmax;
}

double resolve_time_step(const ControlSystem& system, const Grid& grid, const SolverConfig& config) {
  if (config.dt < 0.0 || !std::isfinite(config.dt)) throw InputError("dt must be positive");
  if (config.dt > 0.0) return config.dt;
  return default_time_step(system, grid, build_control_mesh(system.control_dimension(), config.mesh,
                                                            Vec::Zero(system.control_dimension()),
                                                            {system.u_star()}));
}

BellmanOperator::BellmanOperator(const ControlSystem& system, const Lagrangian& lagrangian,
                                 const Grid& grid, const SolverConfig& config, double dt,
                                 Orientation orientation)
    : BellmanOperator(system, lagrangian, grid, solver_control_mesh(system, lagrangian, config), config, dt,
                      orientation) {}

BellmanOperator::BellmanOperator(const ControlSystem& system, const Lagrangian& lagrangian,
                                 const Grid& grid, ControlMesh mesh, const SolverConfig& config,
                                 double dt, Orientation orientation)
    : grid_(grid),
      mesh_(std::move(mesh)),
      dt_(dt),
      boundary_(config.boundary),
      threads_(config.threads),
      d_(system.dimension()),
      m_(system.control_dimension()),
      k_(mesh_.size()),
      affine_(system.is_control_affine()),
      separable_(lagrangian.kind() == LagrangianKind::kQuadraticPlusPotential) {
  check_compatible(system, lagrangian, grid);
  if (mesh_.m != m_ || k_ < 1) throw InputError("control mesh does not match the control dimension");
  if (!(dt > 0.0)) throw InputError("dt must be positive");
  if (config.tolerance <= 0.0) throw InputError("tolerance must be positive");
  if (k_ > std::numeric_limits<std::uint16_t>::max()) throw InputError("control mesh too large");

  const double sign = orientation == Orientation::kForward ? 1.0 : -1.0;
  const std::size_t nn = grid_.size();
  const auto& h = grid_.spacing();
  std::array<double, kMaxDim> scale;
  for (int j = 0; j < d_; ++j) scale[static_cast<std::size_t>(j)] = sign * dt_ / h[static_cast<std::size_t>(j)];

  std::array<double, kMaxDim> x;
  const auto xs = [&] { return std::span<const double>(x.data(), static_cast<std::size_t>(d_)); };
  if (affine_) {
    const std::size_t block = static_cast<std::size_t>(d_ + d_ * m_);
    node_dynamics_.resize(nn * block);
    std::array<double, kMaxDim * kMaxDim> f;
    std::array<double, kMaxDim> f0;
    for (std::size_t n = 0; n < nn; ++n) {
      grid_.node_into(n, x.data());
      system.drift_into(xs(), {f0.data(), static_cast<std::size_t>(d_)});
      system.control_matrix_into(xs(), f);
      double* out = node_dynamics_.data() + n * block;
      for (int j = 0; j < d_; ++j) out[j] = scale[static_cast<std::size_t>(j)] * f0[static_cast<std::size_t>(j)];
      for (int i = 0; i < m_; ++i)
        for (int j = 0; j < d_; ++j)
          out[d_ + i * d_ + j] = scale[static_cast<std::size_t>(j)] * f[static_cast<std::size_t>(i * d_ + j)];
    }
  } else {
    node_velocity_.resize(nn * static_cast<std::size_t>(k_) * static_cast<std::size_t>(d_));
    std::array<double, kMaxDim> v;
    for (std::size_t n = 0; n < nn; ++n) {
      grid_.node_into(n, x.data());
      for (int k = 0; k < k_; ++k) {
        system.eval_into(xs(), {mesh_[k], static_cast<std::size_t>(m_)}, {v.data(), static_cast<std::size_t>(d_)});
        double* out = node_velocity_.data() + (n * static_cast<std::size_t>(k_) + static_cast<std::size_t>(k)) * static_cast<std::size_t>(d_);
        for (int j = 0; j < d_; ++j) out[j] = scale[static_cast<std::size_t>(j)] * v[static_cast<std::size_t>(j)];
      }
    }
  }
  const auto& dyn = affine_ ? node_dynamics_ : node_velocity_;
  for (std::size_t i = 0; i < dyn.size(); ++i)
    if (!std::isfinite(dyn[i]))
      throw DivergenceError("non-finite dynamics at node " +
                            std::to_string(i / (dyn.size() / nn)));
  controls_t_.resize(static_cast<std::size_t>(k_) * static_cast<std::size_t>(m_));
  for (int k = 0; k < k_; ++k)
    for (int i = 0; i < m_; ++i)
      controls_t_[static_cast<std::size_t>(i) * static_cast<std::size_t>(k_) + static_cast<std::size_t>(k)] = mesh_[k][i];
  if (separable_) {
    node_cost_.resize(nn);
    control_cost_.resize(static_cast<std::size_t>(k_));
    for (std::size_t n = 0; n < nn; ++n) {
      grid_.node_into(n, x.data());
      node_cost_[n] = dt_ * lagrangian.potential(xs());
    }
    for (int k = 0; k < k_; ++k)
      control_cost_[static_cast<std::size_t>(k)] =
          dt_ * lagrangian.control_cost({mesh_[k], static_cast<std::size_t>(m_)});
  } else {
    table_cost_.resize(nn * static_cast<std::size_t>(k_));
    for (std::size_t n = 0; n < nn; ++n) {
      grid_.node_into(n, x.data());
      for (int k = 0; k < k_; ++k)
        table_cost_[n * static_cast<std::size_t>(k_) + static_cast<std::size_t>(k)] =
            dt_ * lagrangian.eval_raw(xs(), {mesh_[k], static_cast<std::size_t>(m_)});
    }
  }
}

void BellmanOperator::foot_grid_coords(std::size_t node, int k, double* s) const {
  const auto& stride = grid_.strides();
  std::size_t rem = node;
  for (int j = 0; j < d_; ++j) {
    s[j] = static_cast<double>(rem / stride[static_cast<std::size_t>(j)]);
    rem %= stride[static_cast<std::size_t>(j)];
  }
  if (affine_) {
    const double* dyn = node_dynamics_.data() + node * static_cast<std::size_t>(d_ + d_ * m_);
    const double* u = mesh_[k];
    for (int j = 0; j < d_; ++j) s[j] += dyn[j];
    for (int i = 0; i < m_; ++i)
      for (int j = 0; j < d_; ++j) s[j] += dyn[d_ + i * d_ + j] * u[i];
  } else {
    const double* v = node_velocity_.data() + (node * static_cast<std::size_t>(k_) + static_cast<std::size_t>(k)) * static_cast<std::size_t>(d_);
    for (int j = 0; j < d_; ++j) s[j] += v[j];
  }
}

Vec BellmanOperator::foot(std::size_t node, int k) const {
  double s[kMaxDim];
  foot_grid_coords(node, k, s);
  Vec x(d_);
  for (int j = 0; j < d_; ++j)
    x(j) = grid_.lower()[static_cast<std::size_t>(j)] + s[j] * grid_.spacing()[static_cast<std::size_t>(j)];
  return x;
}

double BellmanOperator::running_cost(std::size_t node, int k) const {
  if (separable_) return node_cost_[node] + control_cost_[static_cast<std::size_t>(k)];
  return table_cost_[node * static_cast<std::size_t>(k_) + static_cast<std::size_t>(k)];
}

template <int D>
void BellmanOperator::sweep(const ValueField& in, ValueField& out, double discount, Policy* policy,
                            std::size_t* hits, std::size_t begin, std::size_t end,
                            std::vector<double>& scratch) const {
  const double* values = in.values().data();
  double* result = out.values().data();
  const auto& stride_v = grid_.strides();
  const auto& nodes = grid_.nodes();
  std::size_t stride[D];
  double top[D], lo[D], hi[D];
  const bool clamp = boundary_ == BoundaryRule::kClamp;
  for (int j = 0; j < D; ++j) {
    stride[j] = stride_v[static_cast<std::size_t>(j)];
    top[j] = static_cast<double>(nodes[static_cast<std::size_t>(j)] - 1);
    // Feet are finite (checked at construction); pulling far ones to within
    // 1000 cells keeps the integer cell conversion below in range.
    lo[j] = clamp ? 0.0 : -1000.0;
    hi[j] = clamp ? top[j] : top[j] + 1000.0;
  }
  const int m = m_;
  const std::size_t kk = static_cast<std::size_t>(k_);
  const std::size_t block = static_cast<std::size_t>(D + D * m);
  scratch.resize((D + 2) * kk);
  double* base = scratch.data();
  double* flag = base + kk;
  double* frac = base + 2 * kk;
  std::size_t local_hits = 0;

  for (std::size_t n = begin; n < end; ++n) {
    double idx[D];
    std::size_t rem = n;
    for (int j = 0; j < D; ++j) {
      idx[j] = static_cast<double>(rem / stride[j]);
      rem %= stride[j];
    }
    for (std::size_t k = 0; k < kk; ++k) base[k] = flag[k] = 0.0;
    for (int j = 0; j < D; ++j) {
      double* t = frac + static_cast<std::size_t>(j) * kk;
      if (affine_) {
        const double* dyn = node_dynamics_.data() + n * block;
        const double s0 = idx[j] + dyn[j];
        for (std::size_t k = 0; k < kk; ++k) t[k] = s0;
        for (int i = 0; i < m; ++i) {
          const double c = dyn[D + i * D + j];
          if (c == 0.0) continue;
          const double* u = controls_t_.data() + static_cast<std::size_t>(i) * kk;
          for (std::size_t k = 0; k < kk; ++k) t[k] += c * u[k];
        }
      } else {
        const double* v = node_velocity_.data() + n * kk * D + j;
        for (std::size_t k = 0; k < kk; ++k) t[k] = idx[j] + v[k * D];
      }
      const double tj = top[j], loj = lo[j], hij = hi[j], sj = static_cast<double>(stride[j]);
      for (std::size_t k = 0; k < kk; ++k) {
        const double s = t[k];
        flag[k] += (s < 0.0) | (s > tj);
        const double sc = std::min(std::max(s, loj), hij);
        double cell = static_cast<double>(static_cast<int>(sc + 1024.0)) - 1024.0;  // floor
        cell = std::min(std::max(cell, 0.0), tj - 1.0);
        t[k] = sc - cell;
        base[k] += cell * sj;
      }
    }
    const double node_cost = separable_ ? node_cost_[n] : 0.0;
    const double* cost = separable_ ? control_cost_.data() : table_cost_.data() + n * kk;
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t k = 0; k < kk; ++k) {
      const double* p = values + static_cast<std::size_t>(base[k]);
      double value;
      if constexpr (D == 1) {
        const double t0 = frac[k];
        value = (1.0 - t0) * p[0] + t0 * p[stride[0]];
      } else if constexpr (D == 2) {
        const double t0 = frac[k], t1 = frac[kk + k];
        const double a = (1.0 - t1) * p[0] + t1 * p[stride[1]];
        const double b = (1.0 - t1) * p[stride[0]] + t1 * p[stride[0] + stride[1]];
        value = (1.0 - t0) * a + t0 * b;
      } else {
        value = 0.0;
        for (int corner = 0; corner < (1 << D); ++corner) {
          double w = 1.0;
          std::size_t at = 0;
          for (int j = 0; j < D; ++j) {
            const double tj = frac[static_cast<std::size_t>(j) * kk + k];
            if (corner & (1 << j)) {
              w *= tj;
              at += stride[j];
            } else {
              w *= 1.0 - tj;
            }
          }
          value += w * p[at];
        }
      }
      const double candidate = (node_cost + cost[k]) + discount * value;
      if (candidate < best) {
        best = candidate;
        arg = k;
      }
    }
    result[n] = best;
    if (policy != nullptr) (*policy)[n] = static_cast<std::uint16_t>(arg);
    if (flag[arg] != 0.0) ++local_hits;
  }
  if (hits != nullptr) *hits += local_hits;
}

void BellmanOperator::apply(const ValueField& in, ValueField& out, double discount, Policy* policy,
                            std::size_t* boundary_hits) const {
  if (!(in.grid() == grid_)) throw InputError("field grid does not match operator grid");
  if (!(out.grid() == grid_)) out = ValueField(grid_);
  if (&in == &out) throw InputError("apply needs distinct input and output fields");
  if (policy != nullptr) policy->resize(grid_.size());
  const std::size_t workers = static_cast<std::size_t>(std::max(1, threads_));
  std::vector<std::size_t> hits(workers, 0);
  std::vector<std::vector<double>> scratch(workers);
  parallel_for(grid_.size(), threads_, [&](std::size_t b, std::size_t e, std::size_t w) {
    switch (d_) {
      case 1:
        sweep<1>(in, out, discount, policy, &hits[w], b, e, scratch[w]);
        break;
      case 2:
        sweep<2>(in, out, discount, policy, &hits[w], b, e, scratch[w]);
        break;
      default:
        sweep<3>(in, out, discount, policy, &hits[w], b, e, scratch[w]);
        break;
    }
  });
  if (boundary_hits != nullptr)
    for (auto h : hits) *boundary_hits += h;
}

Eigen::SparseMatrix<double> BellmanOperator::transition(const Policy& policy) const {
  const std::size_t nn = grid_.size();
  if (policy.size() != nn) throw InputError("policy size does not match grid");
  const auto& stride = grid_.strides();
  const auto& nodes = grid_.nodes();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(nn * (std::size_t{1} << d_));
  double s[kMaxDim], t[kMaxDim];
  for (std::size_t n = 0; n < nn; ++n) {
    foot_grid_coords(n, policy[n], s);
    std::size_t base = 0;
    for (int j = 0; j < d_; ++j) {
      const double top = static_cast<double>(nodes[static_cast<std::size_t>(j)] - 1);
      double sj = boundary_ == BoundaryRule::kClamp ? std::min(std::max(s[j], 0.0), top)
                                                    : std::min(std::max(s[j], -1000.0), top + 1000.0);
      double cell = std::min(std::max(std::floor(sj), 0.0), top - 1.0);
      t[j] = sj - cell;
      base += static_cast<std::size_t>(cell) * stride[static_cast<std::size_t>(j)];
    }
    for (int corner = 0; corner < (1 << d_); ++corner) {
      double w = 1.0;
      std::size_t at = base;
      for (int j = 0; j < d_; ++j) {
        if (corner & (1 << j)) {
          w *= t[j];
          at += stride[static_cast<std::size_t>(j)];
        } else {
          w *= 1.0 - t[j];
        }
      }
      if (w != 0.0)
        triplets.emplace_back(static_cast<int>(n), static_cast<int>(at), w);
    }
  }
  Eigen::SparseMatrix<double> p(static_cast<Eigen::Index>(nn), static_cast<Eigen::Index>(nn));
  p.setFromTriplets(triplets.begin(), triplets.end());
  return p;
}

Eigen::VectorXd BellmanOperator::policy_cost(const Policy& policy) const {
  Eigen::VectorXd c(static_cast<Eigen::Index>(grid_.size()));
  for (std::size_t n = 0; n < grid_.size(); ++n) c(static_cast<Eigen::Index>(n)) = running_cost(n, policy[n]);
  return c;
}

namespace {

void require_finite(const ValueField& f, int step) {
  const auto& v = f.values();
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i]))
      throw DivergenceError("non-finite value at node " + std::to_string(i) + " in step " +
                            std::to_string(step));
}

int steps_for(double t, double dt, const char* what) {
  const double ratio = t / dt;
  const long steps = std::lround(ratio);
  if (std::abs(ratio - static_cast<double>(steps)) > 1e-7 * std::max(1.0, ratio))
    throw InputError(std::string(what) + " " + std::to_string(t) + " is not a multiple of dt " +
                     std::to_string(dt));
  return static_cast<int>(steps);
}

}  // namespace

FiniteHorizonResult solve_finite_horizon(const ControlSystem& system, const Lagrangian& lagrangian,
                                         const Grid& grid, const std::vector<double>& checkpoints,
                                         const SolverConfig& config, bool record_policies) {
  check_compatible(system, lagrangian, grid);
  if (checkpoints.empty()) throw InputError("at least one checkpoint is required");
  for (double t : checkpoints)
    if (!(t >= 0.0) || !std::isfinite(t)) throw InputError("checkpoints must be nonnegative");
  const double horizon = *std::max_element(checkpoints.begin(), checkpoints.end());

  FiniteHorizonResult result;
  const double dt0 = resolve_time_step(system, grid, config);
  int steps = horizon > 0.0 ? static_cast<int>(std::ceil(horizon / dt0 - 1e-9)) : 0;
  double dt = steps > 0 ? horizon / steps : dt0;
  result.dt = dt;
  result.steps = steps;
  result.dt_adjusted = std::abs(dt - dt0) > 1e-12 * dt0;

  std::vector<int> checkpoint_steps;
  for (double t : checkpoints) checkpoint_steps.push_back(steps_for(t, dt, "checkpoint"));
  result.checkpoint_times = checkpoints;
  result.fields.resize(checkpoints.size());

  BellmanOperator op(system, lagrangian, grid, config, dt, BellmanOperator::Orientation::kForward);
  ValueField current(grid, 0.0), next(grid, 0.0);
  auto store = [&](int step) {
    for (std::size_t c = 0; c < checkpoint_steps.size(); ++c)
      if (checkpoint_steps[c] == step) result.fields[c] = current;
  };
  store(0);
  std::size_t hits = 0;
  if (record_policies) result.policies.resize(static_cast<std::size_t>(steps));
  for (int s = 0; s < steps; ++s) {
    op.apply(current, next, 1.0, record_policies ? &result.policies[static_cast<std::size_t>(s)] : nullptr,
             &hits);
    require_finite(next, s + 1);
    std::swap(current, next);
    store(s + 1);
  }
  if (steps > 0)
    result.boundary_fraction = static_cast<double>(hits) / (static_cast<double>(grid.size()) * steps);
  return result;
}

DiscountedResult solve_discounted(const ControlSystem& system, const Lagrangian& lagrangian,
                                  const Grid& grid, double lambda, const SolverConfig& config,
                                  const std::optional<ValueField>& warm_start) {
  check_compatible(system, lagrangian, grid);
  if (!(lambda > 0.0)) throw InputError("discount rate must be positive");
  DiscountedResult result;
  result.dt = resolve_time_step(system, grid, config);
  const double gamma = std::exp(-lambda * result.dt);
  // The step charges dt L; the exact weight of a frozen L over one step is
  // (1 - gamma) / lambda. The fixed point is homogeneous in the cost, so the
  // iteration runs with dt and the result is rescaled.
  const double scale = (1.0 - gamma) / (lambda * result.dt);
  const double threshold = config.tolerance * (1.0 - gamma) / scale;

  BellmanOperator op(system, lagrangian, grid, config, result.dt, BellmanOperator::Orientation::kForward);
  ValueField v = warm_start ? *warm_start : ValueField(grid, 0.0);
  if (!(v.grid() == grid)) throw InputError("warm start lives on a different grid");
  for (double& value : v.values()) value /= scale;
  auto finish = [&](ValueField& field) {
    for (double& value : field.values()) value *= scale;
    result.last_change *= scale;
    result.field = std::move(field);
    return result;
  };
  ValueField next(grid, 0.0);
  Policy policy, previous;

  auto bellman = [&](Policy* pol) {
    op.apply(v, next, gamma, pol);
    ++result.value_iterations;
    require_finite(next, result.value_iterations);
    result.last_change = sup_distance(v, next);
    return result.last_change < threshold;
  };

  // Policy iteration: evaluate the greedy policy exactly, then re-improve.
  const int max_policy_iterations = 100;
  const auto nn = static_cast<Eigen::Index>(grid.size());
  for (int it = 0; it < max_policy_iterations; ++it) {
    if (bellman(&policy)) {
      return finish(next);
    }
    if (it > 0 && policy == previous) break;  // stalled on rounding; finish with plain updates
    Eigen::SparseMatrix<double> a(nn, nn);
    a.setIdentity();
    a -= gamma * op.transition(policy);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) break;
    Eigen::VectorXd w = lu.solve(op.policy_cost(policy));
    if (lu.info() != Eigen::Success || !w.allFinite()) break;
    std::copy(w.data(), w.data() + nn, v.values().begin());
    previous = policy;
    ++result.policy_iterations;
  }
  v = next;
  while (result.value_iterations < config.max_iterations) {
    if (bellman(nullptr)) {
      return finish(next);
    }
    std::swap(v, next);
  }
  throw IterationLimitError("discounted solver hit the iteration limit with change " +
                                std::to_string(result.last_change),
                            result.last_change);
}

ValueField lax_oleinik_apply(const ControlSystem& system, const Lagrangian& lagrangian,
                             const ValueField& phi, double t, const SolverConfig& config) {
  if (system.kind() != SystemKind::kDriftlessAffine)
    throw ModeError("the Lax-Oleinik scheme is implemented for driftless systems");
  check_compatible(system, lagrangian, phi.grid());
  if (!(t >= 0.0)) throw InputError("duration must be nonnegative");
  if (t == 0.0) return phi;
  const double dt = resolve_time_step(system, phi.grid(), config);
  const int steps = steps_for(t, dt, "duration");
  BellmanOperator op(system, lagrangian, phi.grid(), config, dt, BellmanOperator::Orientation::kBackward);
  ValueField current = phi, next(phi.grid(), 0.0);
  for (int s = 0; s < steps; ++s) {
    op.apply(current, next);
    require_finite(next, s + 1);
    std::swap(current, next);
  }
  return current;
}

ResidualReport scheme_residual(const ControlSystem& system, const Lagrangian& lagrangian,
                               const ValueField& field, const SolverConfig& config) {
  const Grid& grid = field.grid();
  const double dt = resolve_time_step(system, grid, config);
  ValueField stepped = lax_oleinik_apply(system, lagrangian, field, dt, config);
  ResidualReport report;
  report.per_node = ValueField(grid, 0.0);
  for (std::size_t n = 0; n < grid.size(); ++n) {
    if (!grid.is_interior(n)) continue;
    double r = std::abs(field[n] - stepped[n]) / dt;
    report.per_node[n] = r;
    report.sup = std::max(report.sup, r);
  }
  const bool closed_form = lagrangian.kind() == LagrangianKind::kQuadraticPlusPotential &&
                           system.kind() == SystemKind::kDriftlessAffine && lagrangian.u_star().norm() == 0.0;
  if (closed_form) {
    double hsup = 0.0;
    const int d = grid.dimension();
    Vec p(d);
    for (std::size_t n = 0; n < grid.size(); ++n) {
      if (!grid.is_interior(n)) continue;
      for (int j = 0; j < d; ++j) {
        const std::size_t s = grid.strides()[static_cast<std::size_t>(j)];
        p(j) = (field[n + s] - field[n - s]) / (2.0 * grid.spacing()[static_cast<std::size_t>(j)]);
      }
      hsup = std::max(hsup, std::abs(hamiltonian(lagrangian, system, grid.node(n), p,
                                                 HamiltonianMode::kClosedForm)));
    }
    report.hamiltonian_sup = hsup;
  }
  return report;
}

}  // namespace ergodic_hjb
