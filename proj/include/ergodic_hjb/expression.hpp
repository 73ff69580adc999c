#pragma once

#include <span>
#include <string>
#include <vector>

namespace ergodic_hjb {

/// Rational expression over state coordinates, compiled once and evaluated
/// by a small stack machine.
///
/// Grammar (whitespace ignored):
///
///   expr   := term (('+' | '-') term)*
///   term   := unary (('*' | '/') unary)*
///   unary  := '-' unary | power
///   power  := atom ('^' integer)?
///   atom   := number | variable | '(' expr ')'
///
/// Variables are `x`, `y`, `z` (coordinates 0, 1, 2) or `x1` ... `x9`
/// (1-based). Exponents are non-negative integer literals, so an expression
/// without '/' is a polynomial; `is_polynomial()` reports which case holds.
class Expression {
 public:
  Expression() = default;

  /// Parses `text`; throws InputError with the offending column on failure.
  /// `dimension` bounds the admissible variable indices.
  static Expression parse(const std::string& text, int dimension);

  double operator()(std::span<const double> x) const;

  /// Exact partial derivative with respect to coordinate `var` (forward-mode
  /// dual numbers, so no truncation error).
  double derivative(std::span<const double> x, int var) const;

  const std::string& text() const { return text_; }
  /// Largest coordinate index referenced plus one (0 for constants).
  int arity() const { return arity_; }
  bool is_polynomial() const { return polynomial_; }

 private:
  enum class Op : unsigned char { kConst, kVar, kAdd, kSub, kMul, kDiv, kNeg, kPow };
  struct Instr {
    Op op;
    int index;     // variable index or exponent
    double value;  // literal
  };

  friend class ExpressionParser;

  std::string text_;
  std::vector<Instr> code_;
  int arity_ = 0;
  int max_stack_ = 0;
  bool polynomial_ = true;
};

}  // namespace ergodic_hjb
