#include "ergodic_hjb/lagrangian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "ergodic_hjb/errors.hpp"

namespace ergodic_hjb {

GrowthBound GrowthBound::table(std::vector<std::pair<double, double>> knots) {
  if (knots.empty()) throw InputError("beta table needs at least one knot");
  for (std::size_t i = 1; i < knots.size(); ++i) {
    if (!(knots[i].first > knots[i - 1].first))
      throw InputError("beta table radii must be strictly increasing");
    if (knots[i].second < knots[i - 1].second)
      throw InputError("beta table must be nondecreasing");
  }
  auto fn = [knots](double r) {
    for (const auto& [radius, bound] : knots)
      if (r <= radius) return bound;
    return std::numeric_limits<double>::infinity();
  };
  return GrowthBound(fn, "table");
}

Lagrangian Lagrangian::quadratic_plus_potential(int d, PotentialFn g, const Vec& u_star,
                                                const Vec& x_star, LagrangianConstants constants,
                                                std::string g_label) {
  if (x_star.size() != d) throw InputError("x_star dimension mismatch");
  if (u_star.size() < 1) throw InputError("u_star must be nonempty");
  Lagrangian l;
  l.kind_ = LagrangianKind::kQuadraticPlusPotential;
  l.d_ = d;
  l.m_ = static_cast<int>(u_star.size());
  l.g_ = std::move(g);
  l.u_star_ = u_star;
  l.x_star_ = x_star;
  l.constants_ = std::move(constants);
  l.label_ = "1/2|u-u*|^2 + " + g_label;
  return l;
}

Lagrangian Lagrangian::generic(int d, int m, CostFn cost, const Vec& u_star, const Vec& x_star,
                               LagrangianConstants constants, std::string label) {
  if (x_star.size() != d) throw InputError("x_star dimension mismatch");
  if (u_star.size() != m) throw InputError("u_star dimension mismatch");
  Lagrangian l;
  l.kind_ = LagrangianKind::kGeneric;
  l.d_ = d;
  l.m_ = m;
  l.cost_ = std::move(cost);
  l.u_star_ = u_star;
  l.x_star_ = x_star;
  l.constants_ = std::move(constants);
  l.label_ = std::move(label);
  return l;
}

Lagrangian Lagrangian::constant(int d, int m, double value) {
  LagrangianConstants c;
  c.beta = GrowthBound([value](double) { return std::abs(value); }, "constant");
  return generic(
      d, m, [value](std::span<const double>, std::span<const double>) { return value; },
      Vec::Zero(m), Vec::Zero(d), c, "constant " + std::to_string(value));
}

Lagrangian Lagrangian::shifted(double c) const {
  Lagrangian l = *this;
  l.shift_ += c;
  if (l.constants_.normalized && c != 0.0) l.constants_.normalized = false;
  return l;
}

double Lagrangian::eval(const Vec& x, const Vec& u) const {
  if (x.size() != d_)
    throw InputError("state has dimension " + std::to_string(x.size()) + ", expected " +
                     std::to_string(d_));
  if (u.size() != m_)
    throw InputError("control has dimension " + std::to_string(u.size()) + ", expected " +
                     std::to_string(m_));
  return eval_raw({x.data(), static_cast<std::size_t>(d_)}, {u.data(), static_cast<std::size_t>(m_)});
}

double Lagrangian::eval_raw(std::span<const double> x, std::span<const double> u) const {
  if (kind_ == LagrangianKind::kQuadraticPlusPotential) return control_cost(u) + potential(x);
  return cost_(x, u) + shift_;
}

double Lagrangian::potential(std::span<const double> x) const {
  if (kind_ != LagrangianKind::kQuadraticPlusPotential)
    throw ModeError("potential is defined for the quadratic kind only");
  return g_(x) + shift_;
}

double Lagrangian::control_cost(std::span<const double> u) const {
  double acc = 0.0;
  for (int i = 0; i < m_; ++i) {
    double du = u[static_cast<std::size_t>(i)] - u_star_(i);
    acc += du * du;
  }
  return 0.5 * acc;
}

bool AssumptionReport::all_passed() const {
  return std::all_of(clauses.begin(), clauses.end(), [](const auto& c) { return c.passed; });
}

const AssumptionClause* AssumptionReport::find(const std::string& name) const {
  for (const auto& c : clauses)
    if (c.name == name) return &c;
  return nullptr;
}

namespace {

// Smallest eigenvalue of the central-difference Hessian of L(x, .) at u.
double min_hessian_eigenvalue(const Lagrangian& l, const Vec& x, const Vec& u, double h) {
  const int m = static_cast<int>(u.size());
  Mat hess(m, m);
  Vec up = u;
  const double l0 = l.eval(x, u);
  for (int i = 0; i < m; ++i) {
    for (int j = i; j < m; ++j) {
      double val;
      if (i == j) {
        up(i) = u(i) + h;
        double lp = l.eval(x, up);
        up(i) = u(i) - h;
        double lm = l.eval(x, up);
        up(i) = u(i);
        val = (lp - 2.0 * l0 + lm) / (h * h);
      } else {
        auto at = [&](double si, double sj) {
          up(i) = u(i) + si * h;
          up(j) = u(j) + sj * h;
          double r = l.eval(x, up);
          up(i) = u(i);
          up(j) = u(j);
          return r;
        };
        val = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * h * h);
      }
      hess(i, j) = hess(j, i) = val;
    }
  }
  Eigen::SelfAdjointEigenSolver<Mat> eig(hess);
  return eig.eigenvalues()(0);
}

struct Worst {
  double margin = std::numeric_limits<double>::infinity();
  Vec x, u;
  void offer(double value, const Vec& xs, const Vec& us) {
    if (value < margin) {
      margin = value;
      x = xs;
      u = us;
    }
  }
};

AssumptionClause make_clause(std::string name, const Worst& w, double tol, std::string detail = {}) {
  AssumptionClause c;
  c.name = std::move(name);
  c.worst = w.margin;
  c.passed = w.margin >= -tol;
  c.witness_x = w.x;
  c.witness_u = w.u;
  c.detail = std::move(detail);
  return c;
}

}  // namespace

AssumptionReport validate_assumptions(const Lagrangian& l, const ControlSystem& system,
                                      double state_half_width, double control_half_width,
                                      int n_samples, std::uint64_t seed) {
  const int d = system.dimension(), m = system.control_dimension();
  if (l.state_dimension() != d || l.control_dimension() != m)
    throw InputError("lagrangian and system dimensions differ");
  const auto& k = l.constants();
  if (state_half_width < k.k_radius)
    throw InputError("sample box must contain the ball K of radius " + std::to_string(k.k_radius));
  if (n_samples < 1) throw InputError("n_samples must be positive");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> sx(-state_half_width, state_half_width);
  std::uniform_real_distribution<double> su(-control_half_width, control_half_width);

  const Vec& us = l.u_star();
  const Vec& xs = l.x_star();
  const double l_star = l.eval(xs, us);
  const double tol = 1e-9;

  Worst growth, convex, l2, l0, argmin, positivity;
  double inf_outside = std::numeric_limits<double>::infinity();
  double min_inside = l_star;
  Vec inf_outside_x;
  Vec x(d), u(m);
  for (int s = 0; s < n_samples; ++s) {
    for (int i = 0; i < d; ++i) x(i) = sx(rng);
    for (int i = 0; i < m; ++i) u(i) = su(rng);
    const double lxu = l.eval(x, u);
    const double lxs = l.eval(x, us);
    if (k.beta.defined())
      growth.offer(k.beta(x.norm()) * (1.0 + u.squaredNorm()) - lxu, x, u);
    convex.offer(min_hessian_eigenvalue(l, x, u, 1e-3) - 1.0 / k.ell1, x, u);
    l2.offer(lxu - lxs, x, u);
    l0.offer(lxu - (u - us).squaredNorm() / (2.0 * k.ell1) - l_star, x, u);
    if (x.norm() <= k.k_radius) {
      min_inside = std::min(min_inside, lxs);
      argmin.offer(lxs - l_star, x, us);
    } else {
      if (lxs < inf_outside) {
        inf_outside = lxs;
        inf_outside_x = x;
      }
      if (k.normalized) positivity.offer(l.eval(x, Vec::Zero(m)), x, Vec::Zero(m));
    }
  }

  AssumptionReport report;
  report.n_samples = n_samples;
  report.box_half_width = state_half_width;

  if (k.beta.defined()) {
    report.clauses.push_back(make_clause("L1_growth", growth, tol, "beta: " + k.beta.label()));
  } else {
    AssumptionClause c;
    c.name = "L1_growth";
    c.passed = false;
    c.worst = -std::numeric_limits<double>::infinity();
    c.detail = "beta not declared";
    report.clauses.push_back(c);
  }
  // Second differences with h = 1e-3 carry O(1e-10 / h^2) rounding.
  report.clauses.push_back(make_clause("L1_convexity", convex, 1e-4));
  report.clauses.push_back(make_clause("L2", l2, tol));
  report.clauses.push_back(make_clause("L0_coercivity", l0, tol));

  {
    Vec f = system.eval(xs, us);
    AssumptionClause c;
    c.name = "L3_stationary";
    c.worst = -f.norm();
    c.passed = f.norm() <= 1e-10;
    c.witness_x = xs;
    c.witness_u = us;
    c.detail = "|f(x*,u*)|";
    report.clauses.push_back(c);
  }
  {
    AssumptionClause c = make_clause("L3_argmin", argmin, tol, "x* minimizes L(.,u*) on K");
    if (xs.norm() > k.k_radius + 1e-12) {
      c.passed = false;
      c.detail = "x* lies outside K";
    }
    report.clauses.push_back(c);
  }
  {
    AssumptionClause c;
    c.name = "L3_gap";
    double gap = inf_outside - min_inside;
    c.worst = gap - k.theta;
    c.passed = k.theta > 0.0 && gap >= k.theta;
    c.witness_x = inf_outside_x;
    c.witness_u = us;
    c.detail = k.theta > 0.0 ? "inf_{x not in K} L(x,u*) - min_K L(x,u*) >= theta"
                             : "theta must be positive";
    report.clauses.push_back(c);
  }
  if (k.normalized) {
    AssumptionClause c;
    c.name = "L3prime_normalization";
    double at_star = l.eval(xs, us);
    c.worst = std::min(positivity.margin, -std::abs(at_star));
    c.passed = std::abs(at_star) <= 1e-12 && positivity.margin > 0.0;
    c.witness_x = positivity.x;
    c.detail = "L(x*,u*) = 0 and L(x,0) > 0 off K";
    report.clauses.push_back(c);
  }
  return report;
}

double hamiltonian(const Lagrangian& l, const ControlSystem& system, const Vec& x, const Vec& p,
                   HamiltonianMode mode, const HamiltonianMeshOptions& opts) {
  const int d = system.dimension(), m = system.control_dimension();
  if (x.size() != d || p.size() != d) throw InputError("state/costate dimension mismatch");
  if (l.state_dimension() != d || l.control_dimension() != m)
    throw InputError("lagrangian and system dimensions differ");

  if (mode == HamiltonianMode::kClosedForm) {
    if (l.kind() != LagrangianKind::kQuadraticPlusPotential || system.kind() != SystemKind::kDriftlessAffine ||
        l.u_star().norm() != 0.0)
      throw ModeError("closed-form Hamiltonian needs a driftless system and 1/2|u|^2 + g(x)");
    Mat f = system.control_matrix(x);
    Vec ftp = f.transpose() * p;
    return 0.5 * ftp.squaredNorm() - l.potential({x.data(), static_cast<std::size_t>(d)});
  }

  // Numeric sup over a box of controls sized from the coercivity of L in u.
  double max_col = 0.0;
  if (system.is_control_affine()) {
    Mat f = system.control_matrix(x);
    for (int j = 0; j < m; ++j) max_col = std::max(max_col, f.col(j).norm());
  } else {
    Vec base = system.eval(x, system.u_star());
    for (int j = 0; j < m; ++j) {
      Vec e = system.u_star();
      e(j) += 1.0;
      max_col = std::max(max_col, (system.eval(x, e) - base).norm());
    }
  }
  const double radius = opts.radius_factor * p.norm() * max_col + l.u_star().norm();
  auto objective = [&](const double* u) {
    std::array<double, kMaxDim> fx;
    system.eval_into({x.data(), static_cast<std::size_t>(d)}, {u, static_cast<std::size_t>(m)},
                     {fx.data(), static_cast<std::size_t>(d)});
    double dot = 0.0;
    for (int i = 0; i < d; ++i) dot += p(i) * fx[static_cast<std::size_t>(i)];
    return dot - l.eval_raw({x.data(), static_cast<std::size_t>(d)}, {u, static_cast<std::size_t>(m)});
  };
  auto best_of = [&](const ControlMesh& mesh, Vec& arg) {
    double best = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < mesh.size(); ++k) {
      double v = objective(mesh[k]);
      if (v > best) {
        best = v;
        arg = mesh.control(k);
      }
    }
    return best;
  };

  ControlMeshSpec coarse{radius, radius > 0.0 ? opts.points_per_axis : 1, false};
  ControlMesh mesh = build_control_mesh(m, coarse, Vec::Zero(m), {l.u_star()});
  Vec arg(m);
  double best = best_of(mesh, arg);
  if (opts.refine && radius > 0.0 && opts.points_per_axis > 1) {
    double spacing = 2.0 * radius / (opts.points_per_axis - 1);
    ControlMeshSpec fine{spacing, opts.points_per_axis, false};
    Vec fine_arg(m);
    double refined = best_of(build_control_mesh(m, fine, arg), fine_arg);
    best = std::max(best, refined);
  }
  return best;
}

}  // namespace ergodic_hjb
