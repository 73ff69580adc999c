#include "ergodic_hjb/trajectory.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <random>

#include "ergodic_hjb/errors.hpp"

namespace ergodic_hjb {

namespace {

using Buf = std::array<double, kMaxDim>;

std::span<const double> cspan(const double* p, int n) { return {p, static_cast<std::size_t>(n)}; }
std::span<double> mspan(double* p, int n) { return {p, static_cast<std::size_t>(n)}; }

// RK4 step; writes x_next, the Hermite midpoint and returns nothing.
// `f0` receives f(x,u) so the caller can reuse it.
void rk4_raw(const ControlSystem& sys, const double* x, const double* u, double h, double* x_next,
             double* x_mid) {
  const int d = sys.dimension(), m = sys.control_dimension();
  Buf k1, k2, k3, k4, tmp, f_end;
  sys.eval_into(cspan(x, d), cspan(u, m), mspan(k1.data(), d));
  for (int i = 0; i < d; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
  sys.eval_into(cspan(tmp.data(), d), cspan(u, m), mspan(k2.data(), d));
  for (int i = 0; i < d; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
  sys.eval_into(cspan(tmp.data(), d), cspan(u, m), mspan(k3.data(), d));
  for (int i = 0; i < d; ++i) tmp[i] = x[i] + h * k3[i];
  sys.eval_into(cspan(tmp.data(), d), cspan(u, m), mspan(k4.data(), d));
  for (int i = 0; i < d; ++i) x_next[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  if (x_mid != nullptr) {
    // Cubic Hermite midpoint from endpoint values and slopes.
    sys.eval_into(cspan(x_next, d), cspan(u, m), mspan(f_end.data(), d));
    for (int i = 0; i < d; ++i)
      x_mid[i] = 0.5 * (x[i] + x_next[i]) + h / 8.0 * (k1[i] - f_end[i]);
  }
}

// One interval of the discretized problem: state update plus Simpson cost.
double step_with_cost(const ControlSystem& sys, const Lagrangian& lag, const double* x,
                      const double* u, double h, double* x_next) {
  const int d = sys.dimension(), m = sys.control_dimension();
  Buf mid;
  rk4_raw(sys, x, u, h, x_next, mid.data());
  const auto us = cspan(u, m);
  return h / 6.0 *
         (lag.eval_raw(cspan(x, d), us) + 4.0 * lag.eval_raw(cspan(mid.data(), d), us) +
          lag.eval_raw(cspan(x_next, d), us));
}

bool all_finite(const double* p, int n) {
  for (int i = 0; i < n; ++i)
    if (!std::isfinite(p[i])) return false;
  return true;
}

void check_grid(const std::vector<double>& t_grid, int intervals) {
  if (t_grid.size() < 2) throw InputError("time grid needs at least two points");
  if (static_cast<int>(t_grid.size()) != intervals + 1)
    throw InputError("control signal must define one control per time interval");
  for (std::size_t k = 1; k < t_grid.size(); ++k)
    if (!(t_grid[k] > t_grid[k - 1])) throw InputError("time grid must be strictly increasing");
}

}  // namespace

std::vector<double> uniform_time_grid(double t_end, int intervals, double t_start) {
  if (intervals < 1) throw InputError("need at least one interval");
  if (!(t_end > t_start)) throw InputError("horizon must be positive");
  std::vector<double> t(static_cast<std::size_t>(intervals) + 1);
  for (int k = 0; k <= intervals; ++k)
    t[static_cast<std::size_t>(k)] = t_start + (t_end - t_start) * k / intervals;
  return t;
}

Vec rk4_step(const ControlSystem& system, const Vec& x, const Vec& u, double h) {
  if (x.size() != system.dimension() || u.size() != system.control_dimension())
    throw InputError("rk4_step dimension mismatch");
  Vec out(system.dimension());
  rk4_raw(system, x.data(), u.data(), h, out.data(), nullptr);
  return out;
}

Trajectory integrate(const ControlSystem& system, const Vec& x0, const Mat& controls,
                     const std::vector<double>& t_grid) {
  const int d = system.dimension(), m = system.control_dimension();
  if (x0.size() != d) throw InputError("initial state dimension mismatch");
  if (controls.rows() != m) throw InputError("control signal has wrong dimension");
  const int n = static_cast<int>(controls.cols());
  check_grid(t_grid, n);

  Trajectory traj;
  traj.times = t_grid;
  traj.states.resize(d, n + 1);
  traj.midpoints.resize(d, n);
  traj.controls = controls;
  traj.states.col(0) = x0;
  for (int k = 0; k < n; ++k) {
    double h = t_grid[static_cast<std::size_t>(k) + 1] - t_grid[static_cast<std::size_t>(k)];
    rk4_raw(system, traj.states.col(k).data(), controls.col(k).data(), h,
            traj.states.col(k + 1).data(), traj.midpoints.col(k).data());
    if (!all_finite(traj.states.col(k + 1).data(), d))
      throw DivergenceError("non-finite state at integration step " + std::to_string(k));
  }
  return traj;
}

double cost(const Lagrangian& lagrangian, Trajectory& traj) {
  const int d = static_cast<int>(traj.states.rows());
  const int m = static_cast<int>(traj.controls.rows());
  const int n = traj.intervals();
  if (lagrangian.state_dimension() != d || lagrangian.control_dimension() != m)
    throw InputError("trajectory and lagrangian dimensions differ");
  auto l_at = [&](const double* x, int k) {
    return lagrangian.eval_raw(cspan(x, d), cspan(traj.controls.col(k).data(), m));
  };
  double total = 0.0;
  if (traj.midpoints.cols() == n) {
    for (int k = 0; k < n; ++k) {
      double h = traj.times[static_cast<std::size_t>(k) + 1] - traj.times[static_cast<std::size_t>(k)];
      total += h / 6.0 *
               (l_at(traj.states.col(k).data(), k) + 4.0 * l_at(traj.midpoints.col(k).data(), k) +
                l_at(traj.states.col(k + 1).data(), k));
    }
  } else {
    // Node values use the control active on the interval to the right.
    std::vector<double> f(static_cast<std::size_t>(n) + 1);
    for (int k = 0; k <= n; ++k) f[static_cast<std::size_t>(k)] = l_at(traj.states.col(k).data(), std::min(k, n - 1));
    const auto& t = traj.times;
    int simpson_end = (n % 2 == 0) ? n : n - 1;
    for (int k = 0; k + 2 <= simpson_end; k += 2) {
      double h0 = t[k + 1] - t[k], h1 = t[k + 2] - t[k + 1];
      if (std::abs(h0 - h1) <= 1e-12 * (h0 + h1)) {
        total += (h0 + h1) / 6.0 * (f[k] + 4.0 * f[k + 1] + f[k + 2]);
      } else {
        total += 0.5 * h0 * (f[k] + f[k + 1]) + 0.5 * h1 * (f[k + 1] + f[k + 2]);
      }
    }
    if (simpson_end != n) total += 0.5 * (t[n] - t[n - 1]) * (f[n - 1] + f[n]);
  }
  traj.cost = total;
  return total;
}

namespace {

struct Problem {
  const ControlSystem& sys;
  const Lagrangian& lag;
  const Vec& x0;
  const std::vector<double>& t;
  const EndpointPenalty* endpoint;
  double mu;

  int d() const { return sys.dimension(); }
  int m() const { return sys.control_dimension(); }
  int n() const { return static_cast<int>(t.size()) - 1; }
  double h(int k) const { return t[static_cast<std::size_t>(k) + 1] - t[static_cast<std::size_t>(k)]; }

  double penalty(const double* x_end) const {
    if (endpoint == nullptr) return 0.0;
    double acc = 0.0;
    for (int i = 0; i < d(); ++i) {
      double r = x_end[i] - endpoint->target(i);
      acc += r * r;
    }
    return mu * acc;
  }

  // Running cost and final state; `states` (d x (N+1)) is filled when non-null.
  double running(const Mat& u, Mat* states, double* x_end) const {
    Buf x, next;
    std::copy(x0.data(), x0.data() + d(), x.begin());
    if (states) states->col(0) = x0;
    double total = 0.0;
    for (int k = 0; k < n(); ++k) {
      total += step_with_cost(sys, lag, x.data(), u.col(k).data(), h(k), next.data());
      if (!all_finite(next.data(), d()) || !std::isfinite(total))
        throw DivergenceError("non-finite objective at interval " + std::to_string(k));
      x = next;
      if (states) states->col(k + 1) = Eigen::Map<const Vec>(x.data(), d());
    }
    std::copy(x.begin(), x.begin() + d(), x_end);
    return total;
  }

  double value(const Mat& u) const {
    Buf x_end;
    double r = running(u, nullptr, x_end.data());
    return r + penalty(x_end.data());
  }

  ObjectiveEval adjoint(const Mat& u) const {
    const int dd = d(), mm = m(), nn = n();
    Mat states(dd, nn + 1);
    Buf x_end;
    ObjectiveEval out;
    out.value = running(u, &states, x_end.data()) + penalty(x_end.data());
    out.gradient.resize(mm, nn);
    Buf lambda{};
    if (endpoint)
      for (int i = 0; i < dd; ++i) lambda[i] = 2.0 * mu * (x_end[i] - endpoint->target(i));
    // Gradient of phi(x,u) = lambda . x_next(x,u) + c(x,u) by central differences.
    std::array<double, 2 * kMaxDim> z;
    Buf next;
    for (int k = nn - 1; k >= 0; --k) {
      for (int i = 0; i < dd; ++i) z[i] = states(i, k);
      for (int j = 0; j < mm; ++j) z[dd + j] = u(j, k);
      auto phi = [&]() {
        double c = step_with_cost(sys, lag, z.data(), z.data() + dd, h(k), next.data());
        double acc = c;
        for (int i = 0; i < dd; ++i) acc += lambda[i] * next[i];
        return acc;
      };
      std::array<double, 2 * kMaxDim> grad;
      for (int i = 0; i < dd + mm; ++i) {
        double orig = z[i];
        double delta = 1e-6 * (1.0 + std::abs(orig));
        z[i] = orig + delta;
        double fp = phi();
        z[i] = orig - delta;
        double fm = phi();
        z[i] = orig;
        grad[i] = (fp - fm) / (2.0 * delta);
      }
      for (int j = 0; j < mm; ++j) out.gradient(j, k) = grad[dd + j];
      for (int i = 0; i < dd; ++i) lambda[i] = grad[i];
    }
    return out;
  }

  ObjectiveEval finite_difference(const Mat& u) const {
    ObjectiveEval out;
    out.value = value(u);
    out.gradient.resize(m(), n());
    Mat probe = u;
    for (int k = 0; k < n(); ++k) {
      for (int j = 0; j < m(); ++j) {
        double orig = probe(j, k);
        double delta = 1e-6 * (1.0 + std::abs(orig));
        probe(j, k) = orig + delta;
        double fp = value(probe);
        probe(j, k) = orig - delta;
        double fm = value(probe);
        probe(j, k) = orig;
        out.gradient(j, k) = (fp - fm) / (2.0 * delta);
      }
    }
    return out;
  }

  ObjectiveEval eval(const Mat& u, GradientMode mode) const {
    return mode == GradientMode::kAdjoint ? adjoint(u) : finite_difference(u);
  }
};

struct DescentOutcome {
  Mat u;
  double value;
  int iterations;
};

// Gradient descent, Barzilai-Borwein step with Armijo backtracking.
DescentOutcome descend(const Problem& prob, Mat u, const DirectOptions& opt) {
  ObjectiveEval cur = prob.eval(u, opt.gradient);
  double alpha = 1.0 / std::max(1.0, cur.gradient.norm());
  std::deque<double> history{cur.value};
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    const double g2 = cur.gradient.squaredNorm();
    if (g2 == 0.0 || !std::isfinite(g2)) break;
    Mat trial;
    double trial_value = 0.0;
    bool accepted = false;
    for (int halving = 0; halving < 60; ++halving) {
      trial = u - alpha * cur.gradient;
      trial_value = prob.value(trial);
      if (trial_value <= cur.value - 1e-4 * alpha * g2) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;
    ObjectiveEval next = prob.eval(trial, opt.gradient);
    Mat s = trial - u;
    Mat y = next.gradient - cur.gradient;
    double sy = (s.array() * y.array()).sum();
    alpha = sy > 0.0 ? s.squaredNorm() / sy : alpha * 2.0;
    alpha = std::clamp(alpha, 1e-14, 1e8);
    u = std::move(trial);
    cur = std::move(next);
    history.push_back(cur.value);
    if (static_cast<int>(history.size()) > opt.stall_window) {
      double old = history.front();
      history.pop_front();
      double scale = std::max(std::abs(cur.value), 1e-12);
      if (old - cur.value < opt.rel_tol * scale) {
        ++it;
        break;
      }
    }
  }
  return {std::move(u), cur.value, it};
}

}  // namespace

ObjectiveEval direct_objective(const ControlSystem& system, const Lagrangian& lagrangian,
                               const Vec& x0, const std::vector<double>& t_grid, const Mat& controls,
                               const std::optional<EndpointPenalty>& endpoint, GradientMode mode) {
  check_grid(t_grid, static_cast<int>(controls.cols()));
  Problem prob{system, lagrangian, x0, t_grid, endpoint ? &*endpoint : nullptr,
               endpoint ? endpoint->mu : 0.0};
  return prob.eval(controls, mode);
}

DirectResult direct_minimize(const ControlSystem& system, const Lagrangian& lagrangian,
                             const Vec& x0, double horizon, int intervals,
                             const std::optional<EndpointPenalty>& endpoint,
                             const DirectOptions& options) {
  const int d = system.dimension(), m = system.control_dimension();
  if (!(horizon > 0.0)) throw InputError("horizon must be positive");
  if (intervals < 1) throw InputError("need at least one control interval");
  if (x0.size() != d) throw InputError("initial state dimension mismatch");
  if (lagrangian.state_dimension() != d || lagrangian.control_dimension() != m)
    throw InputError("lagrangian and system dimensions differ");
  if (endpoint && endpoint->target.size() != d) throw InputError("endpoint dimension mismatch");
  if (options.restarts < 1) throw InputError("restarts must be positive");

  const auto t = uniform_time_grid(horizon, intervals);
  const Vec& u_star = lagrangian.u_star();
  const int rounds = endpoint ? std::max(1, options.penalty_rounds) : 1;

  DirectResult best;
  best.objective = std::numeric_limits<double>::infinity();
  for (int r = 0; r < options.restarts; ++r) {
    Mat u(m, intervals);
    if (r == 0) {
      if (options.initial_controls) {
        if (options.initial_controls->rows() != m || options.initial_controls->cols() != intervals)
          throw InputError("warm-start controls have the wrong shape");
        u = *options.initial_controls;
      } else {
        u = u_star.replicate(1, intervals);
      }
    } else {
      std::mt19937_64 rng(options.seed * 1000003ULL + static_cast<std::uint64_t>(r));
      std::normal_distribution<double> noise(0.0, options.init_scale);
      for (int k = 0; k < intervals; ++k)
        for (int j = 0; j < m; ++j) u(j, k) = u_star(j) + noise(rng);
    }
    double mu = endpoint ? endpoint->mu : 0.0;
    DescentOutcome out{u, 0.0, 0};
    int total_iterations = 0;
    for (int round = 0; round < rounds; ++round) {
      Problem prob{system, lagrangian, x0, t, endpoint ? &*endpoint : nullptr, mu};
      out = descend(prob, out.u, options);
      total_iterations += out.iterations;
      if (round + 1 < rounds) mu *= options.mu_growth;
    }
    if (out.value < best.objective) {
      best.objective = out.value;
      best.trajectory = integrate(system, x0, out.u, t);
      best.best_restart = r;
      best.final_mu = mu;
      best.iterations = total_iterations;
    }
  }
  best.cost = cost(lagrangian, best.trajectory);
  best.endpoint_residual = endpoint ? (best.trajectory.final_state() - endpoint->target).norm() : 0.0;
  return best;
}

TrajectoryBounds trajectory_bounds(const ControlSystem& system, const Trajectory& traj) {
  TrajectoryBounds b;
  const int n = traj.intervals();
  const double x0 = traj.states.col(0).norm();
  for (int k = 0; k < n; ++k) {
    double h = traj.times[static_cast<std::size_t>(k) + 1] - traj.times[static_cast<std::size_t>(k)];
    b.control_l2 += traj.controls.col(k).squaredNorm() * h;
    b.control_sup = std::max(b.control_sup, traj.controls.col(k).norm());
  }
  b.control_l2 = std::sqrt(b.control_l2);
  const double c = system.c_f() * (1.0 + b.control_sup);
  for (int k = 0; k <= n; ++k) {
    double xk = traj.states.col(k).norm();
    b.state_sup = std::max(b.state_sup, xk);
    double s = traj.times[static_cast<std::size_t>(k)] - traj.times[0];
    double bound = (x0 + c * s) * std::exp(c * s);
    if (bound > 0.0) b.gronwall_ratio = std::max(b.gronwall_ratio, xk / bound);
    else if (xk > 0.0) b.gronwall_ratio = std::numeric_limits<double>::infinity();
  }
  b.kappa = (1.0 + b.state_sup) / (1.0 + x0);
  const double scale = system.c_f() * b.kappa * (1.0 + x0) * b.control_l2;
  // Subsample long trajectories; the pair scan is quadratic.
  const int stride = std::max(1, n / 400);
  for (int i = 0; i <= n; i += stride) {
    for (int j = i + stride; j <= n; j += stride) {
      double dt = traj.times[static_cast<std::size_t>(j)] - traj.times[static_cast<std::size_t>(i)];
      double dx = (traj.states.col(j) - traj.states.col(i)).norm();
      if (dx == 0.0) continue;
      double bound = scale * std::sqrt(dt);
      b.holder_ratio = std::max(b.holder_ratio, bound > 0.0 ? dx / bound : std::numeric_limits<double>::infinity());
    }
  }
  return b;
}

void write_trajectory_csv(std::ostream& out, const Lagrangian& lagrangian, const Trajectory& traj) {
  const int d = static_cast<int>(traj.states.rows());
  const int m = static_cast<int>(traj.controls.rows());
  const int n = traj.intervals();
  out << "t";
  for (int i = 1; i <= d; ++i) out << ",x_" << i;
  for (int i = 1; i <= m; ++i) out << ",u_" << i;
  out << ",running_cost\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (int k = 0; k <= n; ++k) {
    int c = std::min(k, n - 1);
    put(traj.times[static_cast<std::size_t>(k)]);
    for (int i = 0; i < d; ++i) {
      out << ',';
      put(traj.states(i, k));
    }
    for (int j = 0; j < m; ++j) {
      out << ',';
      put(traj.controls(j, c));
    }
    out << ',';
    put(lagrangian.eval_raw({traj.states.col(k).data(), static_cast<std::size_t>(d)},
                            {traj.controls.col(c).data(), static_cast<std::size_t>(m)}));
    out << '\n';
  }
}

}  // namespace ergodic_hjb
