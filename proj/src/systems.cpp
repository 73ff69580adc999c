#include "ergodic_hjb/systems.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "ergodic_hjb/errors.hpp"

namespace ergodic_hjb {

std::string to_string(SystemKind kind) {
  switch (kind) {
    case SystemKind::kGeneric:
      return "generic";
    case SystemKind::kDriftlessAffine:
      return "driftless_affine";
    case SystemKind::kLinear:
      return "linear";
  }
  return "unknown";
}

namespace {

void check_dims(int d, int m) {
  if (d < 1 || m < 1) throw InputError("state and control dimensions must be positive");
  if (d > kMaxDim || m > kMaxDim)
    throw InputError("dimension exceeds supported maximum of " + std::to_string(kMaxDim));
}

}  // namespace

ControlSystem ControlSystem::heisenberg() {
  ControlSystem s;
  s.name_ = "heisenberg";
  s.kind_ = SystemKind::kDriftlessAffine;
  s.d_ = 3;
  s.m_ = 2;
  s.c_f_ = 1.0;
  s.u_star_ = Vec::Zero(2);
  s.control_matrix_ = [](std::span<const double> x, std::span<double> f) {
    // column 0: (1, 0, y); column 1: (0, 1, -x)
    f[0] = 1.0;
    f[1] = 0.0;
    f[2] = x[1];
    f[3] = 0.0;
    f[4] = 1.0;
    f[5] = -x[0];
  };
  // [X1, X2] = DX2 X1 - DX1 X2 = (0, 0, -2).
  s.exact_bracket_ = [](int i, int j, const Vec&) -> Vec {
    Vec r = Vec::Zero(3);
    if (i == 0 && j == 1) r(2) = -2.0;
    if (i == 1 && j == 0) r(2) = 2.0;
    return r;
  };
  return s;
}

ControlSystem ControlSystem::grushin(const Expression& phi, double c_f) {
  if (phi.arity() > 1) throw InputError("grushin phi must depend on x only");
  if (!phi.is_polynomial()) throw InputError("grushin phi must be a polynomial in x");
  ControlSystem s;
  s.name_ = "grushin";
  s.kind_ = SystemKind::kDriftlessAffine;
  s.d_ = 2;
  s.m_ = 2;
  s.c_f_ = c_f;
  s.u_star_ = Vec::Zero(2);
  s.control_matrix_ = [phi](std::span<const double> x, std::span<double> f) {
    f[0] = 1.0;
    f[1] = 0.0;
    f[2] = 0.0;
    f[3] = phi(x);
  };
  // [X1, X2] = DX2 X1 - DX1 X2 = (0, phi'(x)).
  s.exact_bracket_ = [phi](int i, int j, const Vec& x) -> Vec {
    Vec r = Vec::Zero(2);
    if (i == j) return r;
    double dphi = phi.derivative(std::span<const double>(x.data(), 2), 0);
    r(1) = (i == 0) ? dphi : -dphi;
    return r;
  };
  return s;
}

ControlSystem ControlSystem::euclidean(int d) {
  check_dims(d, d);
  ControlSystem s;
  s.name_ = "euclidean";
  s.kind_ = SystemKind::kDriftlessAffine;
  s.d_ = d;
  s.m_ = d;
  s.c_f_ = 1.0;
  s.u_star_ = Vec::Zero(d);
  s.control_matrix_ = [d](std::span<const double>, std::span<double> f) {
    std::fill(f.begin(), f.begin() + d * d, 0.0);
    for (int i = 0; i < d; ++i) f[static_cast<std::size_t>(i * d + i)] = 1.0;
  };
  s.exact_bracket_ = [d](int, int, const Vec&) -> Vec { return Vec::Zero(d); };
  return s;
}

ControlSystem ControlSystem::driftless(std::string name, int d, std::vector<VectorField> fields,
                                       double c_f) {
  int m = static_cast<int>(fields.size());
  check_dims(d, m);
  ControlSystem s;
  s.name_ = std::move(name);
  s.kind_ = SystemKind::kDriftlessAffine;
  s.d_ = d;
  s.m_ = m;
  s.c_f_ = c_f;
  s.u_star_ = Vec::Zero(m);
  s.control_matrix_ = [d, fields = std::move(fields)](std::span<const double> x,
                                                      std::span<double> f) {
    Vec xv = Eigen::Map<const Vec>(x.data(), d);
    for (std::size_t i = 0; i < fields.size(); ++i) {
      Vec col = fields[i](xv);
      if (col.size() != d) throw InputError("vector field returned wrong dimension");
      std::copy(col.data(), col.data() + d, f.begin() + static_cast<std::ptrdiff_t>(i) * d);
    }
  };
  return s;
}

ControlSystem ControlSystem::linear(std::string name, const Mat& a, const Mat& b,
                                    std::optional<double> c_f) {
  if (a.rows() != a.cols()) throw InputError("A must be square");
  if (b.rows() != a.rows()) throw InputError("B must have as many rows as A");
  int d = static_cast<int>(a.rows());
  int m = static_cast<int>(b.cols());
  check_dims(d, m);
  ControlSystem s;
  s.name_ = std::move(name);
  s.kind_ = SystemKind::kLinear;
  s.d_ = d;
  s.m_ = m;
  s.a_ = a;
  s.b_ = b;
  // |Ax + Bu| <= max(|A|,|B|)(|x| + |u|) <= c (1+|u|)(1+|x|).
  double spectral_a = a.size() ? Eigen::JacobiSVD<Mat>(a).singularValues()(0) : 0.0;
  double spectral_b = b.size() ? Eigen::JacobiSVD<Mat>(b).singularValues()(0) : 0.0;
  s.c_f_ = c_f.value_or(std::max(spectral_a, spectral_b));
  s.u_star_ = Vec::Zero(m);
  s.control_matrix_ = [b](std::span<const double>, std::span<double> f) {
    std::copy(b.data(), b.data() + b.size(), f.begin());
  };
  return s;
}

ControlSystem ControlSystem::generic(std::string name, int d, int m, DynamicsFn f, double c_f,
                                     const Vec& u_star) {
  check_dims(d, m);
  if (u_star.size() != m) throw InputError("u_star dimension mismatch");
  ControlSystem s;
  s.name_ = std::move(name);
  s.kind_ = SystemKind::kGeneric;
  s.d_ = d;
  s.m_ = m;
  s.c_f_ = c_f;
  s.u_star_ = u_star;
  s.generic_ = std::move(f);
  return s;
}

ControlSystem ControlSystem::double_integrator() {
  Mat a(2, 2), b(2, 1);
  a << 0, 1, 0, 0;
  b << 0, 1;
  return linear("double-integrator", a, b, 1.0);
}

ControlSystem ControlSystem::harmonic_oscillator() {
  Mat a(2, 2), b(2, 1);
  a << 0, 1, -1, 0;
  b << 0, 1;
  return linear("harmonic-oscillator", a, b, 1.0);
}

Vec ControlSystem::eval(const Vec& x, const Vec& u) const {
  if (x.size() != d_)
    throw InputError("state has dimension " + std::to_string(x.size()) + ", expected " +
                     std::to_string(d_));
  if (u.size() != m_)
    throw InputError("control has dimension " + std::to_string(u.size()) + ", expected " +
                     std::to_string(m_));
  Vec out(d_);
  eval_into({x.data(), static_cast<std::size_t>(d_)}, {u.data(), static_cast<std::size_t>(m_)},
            {out.data(), static_cast<std::size_t>(d_)});
  return out;
}

void ControlSystem::eval_into(std::span<const double> x, std::span<const double> u,
                              std::span<double> out) const {
  if (kind_ == SystemKind::kGeneric) {
    generic_(x, u, out);
    return;
  }
  std::array<double, kMaxDim * kMaxDim> f;
  control_matrix_(x, f);
  drift_into(x, out);
  for (int j = 0; j < m_; ++j) {
    double uj = u[static_cast<std::size_t>(j)];
    if (uj == 0.0) continue;
    const double* col = f.data() + j * d_;
    for (int i = 0; i < d_; ++i) out[static_cast<std::size_t>(i)] += col[i] * uj;
  }
}

Mat ControlSystem::control_matrix(const Vec& x) const {
  if (!is_control_affine()) throw ModeError("control matrix requested for a generic system");
  if (x.size() != d_) throw InputError("state dimension mismatch");
  Mat f(d_, m_);
  control_matrix_into({x.data(), static_cast<std::size_t>(d_)},
                      {f.data(), static_cast<std::size_t>(d_ * m_)});
  return f;
}

void ControlSystem::control_matrix_into(std::span<const double> x, std::span<double> out) const {
  control_matrix_(x, out);
}

void ControlSystem::drift_into(std::span<const double> x, std::span<double> out) const {
  if (kind_ == SystemKind::kLinear) {
    for (int i = 0; i < d_; ++i) {
      double acc = 0.0;
      for (int j = 0; j < d_; ++j) acc += a_(i, j) * x[static_cast<std::size_t>(j)];
      out[static_cast<std::size_t>(i)] = acc;
    }
  } else {
    std::fill(out.begin(), out.begin() + d_, 0.0);
  }
}

VectorField ControlSystem::field(int i) const {
  if (kind_ != SystemKind::kDriftlessAffine)
    throw ModeError("vector fields are defined for driftless systems only");
  if (i < 0 || i >= m_) throw InputError("field index out of range");
  return [fn = control_matrix_, d = d_, m = m_, i](const Vec& x) -> Vec {
    std::array<double, kMaxDim * kMaxDim> f;
    fn({x.data(), static_cast<std::size_t>(d)}, f);
    (void)m;
    return Eigen::Map<const Vec>(f.data() + i * d, d);
  };
}

std::vector<VectorField> ControlSystem::fields() const {
  std::vector<VectorField> out;
  for (int i = 0; i < m_; ++i) out.push_back(field(i));
  return out;
}

Vec lie_bracket(const VectorField& x_field, const VectorField& y_field, const Vec& x, double h) {
  if (!(h > 0.0)) throw InputError("bracket step must be positive");
  const auto d = x.size();
  Vec xv = x_field(x);
  Vec yv = y_field(x);
  Mat jx(d, d), jy(d, d);
  Vec probe = x;
  for (Eigen::Index j = 0; j < d; ++j) {
    probe(j) = x(j) + h;
    Vec xp = x_field(probe), yp = y_field(probe);
    probe(j) = x(j) - h;
    Vec xm = x_field(probe), ym = y_field(probe);
    probe(j) = x(j);
    jx.col(j) = (xp - xm) / (2.0 * h);
    jy.col(j) = (yp - ym) / (2.0 * h);
  }
  return jy * xv - jx * yv;
}

int numerical_rank(const Mat& m, double rank_tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > rank_tol * s(0)) ++rank;
  return rank;
}

ChowReport check_chow(const ControlSystem& system, const Vec& x, int max_degree, double h,
                      double rank_tol) {
  if (system.kind() != SystemKind::kDriftlessAffine)
    throw ModeError("Chow condition applies to driftless systems");
  if (x.size() != system.dimension()) throw InputError("state dimension mismatch");
  if (max_degree < 1) throw InputError("max_degree must be positive");

  const int d = system.dimension();
  std::vector<VectorField> base = system.fields();
  std::vector<VectorField> newest = base;  // generators added at the last level
  std::vector<Vec> values;
  for (const auto& f : base) values.push_back(f(x));

  ChowReport report;
  report.point = x;
  auto rank_of = [&]() {
    Mat span(d, static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) span.col(static_cast<Eigen::Index>(i)) = values[i];
    return numerical_rank(span, rank_tol);
  };

  for (int s = 1; s <= max_degree; ++s) {
    if (s > 1) {
      std::vector<VectorField> next;
      for (const auto& f : base) {
        for (const auto& g : newest) {
          VectorField bracket = [f, g, h](const Vec& p) { return lie_bracket(f, g, p, h); };
          values.push_back(bracket(x));
          next.push_back(std::move(bracket));
        }
      }
      newest = std::move(next);
    }
    int rank = rank_of();
    report.basis_ranks.push_back(rank);
    if (rank == d) {
      report.holds = true;
      report.degree = s;
      return report;
    }
  }
  report.holds = false;
  report.degree = max_degree;
  return report;
}

bool kalman_controllable(const Mat& a, const Mat& b, double rank_tol) {
  if (a.rows() != a.cols()) throw InputError("A must be square");
  if (b.rows() != a.rows()) throw InputError("B must have as many rows as A");
  const auto d = a.rows();
  const auto m = b.cols();
  Mat q(d, d * m);
  Mat block = b;
  for (Eigen::Index k = 0; k < d; ++k) {
    q.middleCols(k * m, m) = block;
    block = a * block;
  }
  return numerical_rank(q, rank_tol) == d;
}

GrowthAudit audit_growth(const ControlSystem& system, double state_radius, double control_radius,
                         int n_samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> sx(-state_radius, state_radius);
  std::uniform_real_distribution<double> su(-control_radius, control_radius);
  const int d = system.dimension(), m = system.control_dimension();
  GrowthAudit audit;
  Vec x(d), y(d), u(m), w(m);
  for (int k = 0; k < n_samples; ++k) {
    for (int i = 0; i < d; ++i) x(i) = sx(rng);
    for (int i = 0; i < d; ++i) y(i) = sx(rng);
    for (int i = 0; i < m; ++i) u(i) = su(rng);
    for (int i = 0; i < m; ++i) w(i) = su(rng);
    Vec fx = system.eval(x, u);
    Vec fy = system.eval(y, u);
    double dist = (x - y).norm();
    if (dist > 0.0)
      audit.worst_lipschitz_quotient =
          std::max(audit.worst_lipschitz_quotient, (fx - fy).norm() / ((1.0 + u.norm()) * dist));
    audit.worst_growth_quotient =
        std::max(audit.worst_growth_quotient, fx.norm() / ((1.0 + u.norm()) * (1.0 + x.norm())));
    if (system.kind() == SystemKind::kDriftlessAffine) {
      const double alpha = 0.7, beta = -1.3;
      Vec lhs = system.eval(x, alpha * u + beta * w);
      Vec rhs = alpha * fx + beta * system.eval(x, w);
      double scale = 1.0 + lhs.norm() + rhs.norm();
      audit.worst_affine_defect = std::max(audit.worst_affine_defect, (lhs - rhs).norm() / scale);
    }
  }
  const double slack = 1e-12;
  audit.lipschitz_ok = audit.worst_lipschitz_quotient <= system.c_f() + slack;
  audit.growth_ok = audit.worst_growth_quotient <= system.c_f() + slack;
  audit.affine_ok = audit.worst_affine_defect <= 1e-12;
  return audit;
}

}  // namespace ergodic_hjb
