#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ergodic_hjb/control_mesh.hpp"
#include "ergodic_hjb/systems.hpp"

namespace ergodic_hjb {

enum class LagrangianKind { kQuadraticPlusPotential, kGeneric };

/// Nondecreasing bound beta(|x|) with L(x,u) <= beta(|x|)(1+|u|^2).
/// Either a closed form or a step table of (radius, bound) knots.
class GrowthBound {
 public:
  GrowthBound() = default;
  explicit GrowthBound(std::function<double(double)> closed_form, std::string label = "closed form")
      : fn_(std::move(closed_form)), label_(std::move(label)) {}
  /// Knots must have increasing radii and nondecreasing bounds; the bound at r
  /// is the value of the first knot with radius >= r (infinite beyond the last).
  static GrowthBound table(std::vector<std::pair<double, double>> knots);

  bool defined() const { return static_cast<bool>(fn_); }
  double operator()(double r) const { return fn_(r); }
  const std::string& label() const { return label_; }

 private:
  std::function<double(double)> fn_;
  std::string label_;
};

/// Assumption constants declared alongside a running cost.
struct LagrangianConstants {
  double ell1 = 1.0;
  double theta = 0.0;
  double k_radius = 1.0;  // K is the closed ball of this radius
  GrowthBound beta;
  bool normalized = false;  // declares min_K L(., 0) = 0 and positivity off K
};

/// Running cost L(x, u).
///
/// The quadratic form L(x,u) = 1/2 |u - u*|^2 + g(x) is separable, which the
/// grid solvers exploit; everything else goes through a generic callable.
class Lagrangian {
 public:
  using PotentialFn = std::function<double(std::span<const double> x)>;
  using CostFn = std::function<double(std::span<const double> x, std::span<const double> u)>;

  static Lagrangian quadratic_plus_potential(int d, PotentialFn g, const Vec& u_star,
                                             const Vec& x_star, LagrangianConstants constants,
                                             std::string g_label = "g");
  static Lagrangian generic(int d, int m, CostFn cost, const Vec& u_star, const Vec& x_star,
                            LagrangianConstants constants, std::string label = "generic");
  /// L(x,u) = value; handy for exactness checks.
  static Lagrangian constant(int d, int m, double value);

  /// L + c (the potential absorbs the shift for the quadratic kind).
  Lagrangian shifted(double c) const;

  LagrangianKind kind() const { return kind_; }
  int state_dimension() const { return d_; }
  int control_dimension() const { return m_; }
  const Vec& u_star() const { return u_star_; }
  const Vec& x_star() const { return x_star_; }
  const LagrangianConstants& constants() const { return constants_; }
  double shift() const { return shift_; }
  const std::string& label() const { return label_; }

  /// Checked evaluation; throws InputError on dimension mismatch.
  double eval(const Vec& x, const Vec& u) const;
  double eval_raw(std::span<const double> x, std::span<const double> u) const;

  /// Quadratic kind only: g(x) + shift.
  double potential(std::span<const double> x) const;
  /// Quadratic kind only: 1/2 |u - u*|^2.
  double control_cost(std::span<const double> u) const;

 private:
  Lagrangian() = default;

  LagrangianKind kind_ = LagrangianKind::kGeneric;
  int d_ = 0;
  int m_ = 0;
  PotentialFn g_;
  CostFn cost_;
  Vec u_star_, x_star_;
  LagrangianConstants constants_;
  double shift_ = 0.0;
  std::string label_;
};

struct AssumptionClause {
  std::string name;
  bool passed = false;
  double worst = 0.0;  // signed margin of the worst sample (negative = violated)
  Vec witness_x;
  Vec witness_u;
  std::string detail;
};

struct AssumptionReport {
  std::vector<AssumptionClause> clauses;
  int n_samples = 0;
  double box_half_width = 0.0;
  bool all_passed() const;
  const AssumptionClause* find(const std::string& name) const;
};

/// Audits the cost assumptions by sampling states in [-h, h]^d and controls in
/// [-c, c]^m, with h = `state_half_width` and c = `control_half_width`.
AssumptionReport validate_assumptions(const Lagrangian& lagrangian, const ControlSystem& system,
                                      double state_half_width, double control_half_width,
                                      int n_samples, std::uint64_t seed);

enum class HamiltonianMode { kClosedForm, kNumeric };

struct HamiltonianMeshOptions {
  double radius_factor = 3.0;
  int points_per_axis = 41;
  bool refine = true;
};

/// H(x,p) = sup_u <p, f(x,u)> - L(x,u).
double hamiltonian(const Lagrangian& lagrangian, const ControlSystem& system, const Vec& x,
                   const Vec& p, HamiltonianMode mode, const HamiltonianMeshOptions& mesh = {});

}  // namespace ergodic_hjb
