#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ergodic_hjb/expression.hpp"

namespace ergodic_hjb {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Upper bound on state and control dimensions; keeps hot-path scratch
/// buffers on the stack.
inline constexpr int kMaxDim = 16;

/// A state-space vector field X: R^d -> R^d.
using VectorField = std::function<Vec(const Vec&)>;

enum class SystemKind { kGeneric, kDriftlessAffine, kLinear };

std::string to_string(SystemKind kind);

/// Control system  x' = f(x, u)  on R^d with controls in R^m.
///
/// Driftless and linear systems are stored in control-affine form
/// f(x, u) = f0(x) + F(x) u, so grid solvers can evaluate one F per node and
/// reuse it across the whole control mesh.
class ControlSystem {
 public:
  /// Writes F(x) (d x m, column-major) into `out`.
  using ControlMatrixFn = std::function<void(std::span<const double> x, std::span<double> out)>;
  /// Writes f(x, u) into `out`.
  using DynamicsFn = std::function<void(std::span<const double> x, std::span<const double> u,
                                        std::span<double> out)>;
  /// Exact bracket [f_i, f_j](x), shipped by built-ins for cross-checks.
  using BracketFn = std::function<Vec(int i, int j, const Vec& x)>;

  /// x' = u, y' = v, z' = u y - v x.
  static ControlSystem heisenberg();
  /// x' = u, y' = phi(x) v; `phi` must depend on x only.
  static ControlSystem grushin(const Expression& phi, double c_f = 1.0);
  /// x' = u in R^d.
  static ControlSystem euclidean(int d);
  /// Driftless system with columns given by `fields`.
  static ControlSystem driftless(std::string name, int d, std::vector<VectorField> fields,
                                 double c_f);
  static ControlSystem linear(std::string name, const Mat& a, const Mat& b,
                              std::optional<double> c_f = std::nullopt);
  static ControlSystem generic(std::string name, int d, int m, DynamicsFn f, double c_f,
                               const Vec& u_star);

  static ControlSystem double_integrator();
  static ControlSystem harmonic_oscillator();

  const std::string& name() const { return name_; }
  SystemKind kind() const { return kind_; }
  int dimension() const { return d_; }
  int control_dimension() const { return m_; }
  double c_f() const { return c_f_; }
  const Vec& u_star() const { return u_star_; }
  bool is_control_affine() const { return kind_ != SystemKind::kGeneric; }

  /// f(x, u); throws InputError on dimension mismatch.
  Vec eval(const Vec& x, const Vec& u) const;
  /// Unchecked fast path used inside integrators and grid sweeps.
  void eval_into(std::span<const double> x, std::span<const double> u, std::span<double> out) const;

  /// F(x) for control-affine kinds (B for linear systems).
  Mat control_matrix(const Vec& x) const;
  void control_matrix_into(std::span<const double> x, std::span<double> out) const;
  /// f0(x): zero for driftless, A x for linear.
  void drift_into(std::span<const double> x, std::span<double> out) const;

  /// The i-th control column as a vector field (driftless kind only).
  VectorField field(int i) const;
  std::vector<VectorField> fields() const;

  const Mat& a() const { return a_; }
  const Mat& b() const { return b_; }

  const std::optional<BracketFn>& exact_bracket() const { return exact_bracket_; }

 private:
  ControlSystem() = default;

  std::string name_;
  SystemKind kind_ = SystemKind::kGeneric;
  int d_ = 0;
  int m_ = 0;
  double c_f_ = 0.0;
  Vec u_star_;
  ControlMatrixFn control_matrix_;
  DynamicsFn generic_;
  Mat a_, b_;
  std::optional<BracketFn> exact_bracket_;
};

/// Result of a Lie-algebra rank computation at one point.
struct ChowReport {
  Vec point;
  bool holds = false;
  int degree = 0;
  std::vector<int> basis_ranks;  // rank of Delta^s(x), s = 1..degree
};

/// [X, Y](x) = DY(x) X(x) - DX(x) Y(x) with central-difference Jacobians.
Vec lie_bracket(const VectorField& x_field, const VectorField& y_field, const Vec& x, double h);

/// Numerical rank: singular values above `rank_tol` times the largest one.
int numerical_rank(const Mat& m, double rank_tol);

/// Builds the bracket filtration at `x` until it spans R^d or `max_degree`
/// is reached. Requires a driftless system.
ChowReport check_chow(const ControlSystem& system, const Vec& x, int max_degree,
                      double h = 1e-4, double rank_tol = 1e-8);

/// rank [B, AB, ..., A^{d-1}B] == d.
bool kalman_controllable(const Mat& a, const Mat& b, double rank_tol = 1e-8);

/// Worst sampled ratios for the Lipschitz and growth bounds on f.
struct GrowthAudit {
  double worst_lipschitz_quotient = 0.0;  // |f(x,u)-f(y,u)| / ((1+|u|)|x-y|)
  double worst_growth_quotient = 0.0;     // |f(x,u)| / ((1+|u|)(1+|x|))
  double worst_affine_defect = 0.0;       // driftless only: linearity in u
  bool lipschitz_ok = false;
  bool growth_ok = false;
  bool affine_ok = true;
};

/// Samples (x, y, u) uniformly in the box [-state_radius, state_radius]^d x
/// [-control_radius, control_radius]^m and compares against c_f.
GrowthAudit audit_growth(const ControlSystem& system, double state_radius, double control_radius,
                         int n_samples, std::uint64_t seed);

}  // namespace ergodic_hjb
