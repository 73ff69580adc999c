#include "ergodic_hjb/expression.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>

#include "ergodic_hjb/errors.hpp"

namespace ergodic_hjb {

class ExpressionParser {
 public:
  ExpressionParser(const std::string& text, int dimension)
      : text_(text), dimension_(dimension) {}

  Expression run() {
    Expression e;
    e.text_ = text_;
    out_ = &e;
    parse_expr();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected character");
    // Stack depth: simulate once.
    int depth = 0;
    for (const auto& ins : e.code_) {
      switch (ins.op) {
        case Expression::Op::kConst:
        case Expression::Op::kVar:
          ++depth;
          break;
        case Expression::Op::kAdd:
        case Expression::Op::kSub:
        case Expression::Op::kMul:
        case Expression::Op::kDiv:
          --depth;
          break;
        default:
          break;
      }
      e.max_stack_ = std::max(e.max_stack_, depth);
    }
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw InputError("expression '" + text_ + "': " + why + " at column " +
                     std::to_string(pos_ + 1));
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void emit(Expression::Op op, int index = 0, double value = 0.0) {
    out_->code_.push_back({op, index, value});
  }

  void parse_expr() {
    parse_term();
    for (;;) {
      if (accept('+')) {
        parse_term();
        emit(Expression::Op::kAdd);
      } else if (accept('-')) {
        parse_term();
        emit(Expression::Op::kSub);
      } else {
        return;
      }
    }
  }

  void parse_term() {
    parse_unary();
    for (;;) {
      if (accept('*')) {
        parse_unary();
        emit(Expression::Op::kMul);
      } else if (accept('/')) {
        parse_unary();
        emit(Expression::Op::kDiv);
        out_->polynomial_ = false;
      } else {
        return;
      }
    }
  }

  void parse_unary() {
    if (accept('-')) {
      parse_unary();
      emit(Expression::Op::kNeg);
      return;
    }
    if (accept('+')) {
      parse_unary();
      return;
    }
    parse_power();
  }

  void parse_power() {
    parse_atom();
    if (accept('^')) {
      skip_space();
      std::size_t start = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (start == pos_) fail("exponent must be a non-negative integer literal");
      int exponent = std::atoi(text_.substr(start, pos_ - start).c_str());
      if (exponent > 32) fail("exponent too large");
      emit(Expression::Op::kPow, exponent);
    }
  }

  void parse_atom() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      parse_expr();
      if (!accept(')')) fail("expected ')'");
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = text_.c_str() + pos_;
      char* end = nullptr;
      double v = std::strtod(begin, &end);
      if (end == begin) fail("bad number");
      pos_ += static_cast<std::size_t>(end - begin);
      emit(Expression::Op::kConst, 0, v);
      return;
    }
    int index = -1;
    if (c == 'x' && pos_ + 1 < text_.size() &&
        std::isdigit(static_cast<unsigned char>(text_[pos_ + 1]))) {
      index = text_[pos_ + 1] - '1';
      pos_ += 2;
      if (index < 0) fail("variable indices start at x1");
    } else if (c == 'x' || c == 'y' || c == 'z') {
      index = c - 'x';
      ++pos_;
    } else {
      fail(std::string("unknown symbol '") + c + "'");
    }
    if (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_])))
      fail("unknown identifier");
    if (index >= dimension_)
      fail("variable index " + std::to_string(index + 1) + " exceeds dimension " +
           std::to_string(dimension_));
    out_->arity_ = std::max(out_->arity_, index + 1);
    emit(Expression::Op::kVar, index);
  }

  const std::string& text_;
  int dimension_;
  std::size_t pos_ = 0;
  Expression* out_ = nullptr;
};

Expression Expression::parse(const std::string& text, int dimension) {
  return ExpressionParser(text, dimension).run();
}

double Expression::operator()(std::span<const double> x) const {
  double stack_buf[32];
  std::vector<double> heap;
  double* stack = stack_buf;
  if (max_stack_ > 32) {
    heap.resize(static_cast<std::size_t>(max_stack_));
    stack = heap.data();
  }
  int top = 0;
  for (const auto& ins : code_) {
    switch (ins.op) {
      case Op::kConst:
        stack[top++] = ins.value;
        break;
      case Op::kVar:
        stack[top++] = x[static_cast<std::size_t>(ins.index)];
        break;
      case Op::kAdd:
        --top;
        stack[top - 1] += stack[top];
        break;
      case Op::kSub:
        --top;
        stack[top - 1] -= stack[top];
        break;
      case Op::kMul:
        --top;
        stack[top - 1] *= stack[top];
        break;
      case Op::kDiv:
        --top;
        stack[top - 1] /= stack[top];
        break;
      case Op::kNeg:
        stack[top - 1] = -stack[top - 1];
        break;
      case Op::kPow: {
        double base = stack[top - 1];
        double r = 1.0;
        for (int k = 0; k < ins.index; ++k) r *= base;
        stack[top - 1] = r;
        break;
      }
    }
  }
  return top == 1 ? stack[0] : 0.0;
}

double Expression::derivative(std::span<const double> x, int var) const {
  struct Dual {
    double v, d;
  };
  std::vector<Dual> stack(static_cast<std::size_t>(std::max(max_stack_, 1)));
  int top = 0;
  for (const auto& ins : code_) {
    switch (ins.op) {
      case Op::kConst:
        stack[top++] = {ins.value, 0.0};
        break;
      case Op::kVar:
        stack[top++] = {x[static_cast<std::size_t>(ins.index)], ins.index == var ? 1.0 : 0.0};
        break;
      case Op::kAdd:
        --top;
        stack[top - 1] = {stack[top - 1].v + stack[top].v, stack[top - 1].d + stack[top].d};
        break;
      case Op::kSub:
        --top;
        stack[top - 1] = {stack[top - 1].v - stack[top].v, stack[top - 1].d - stack[top].d};
        break;
      case Op::kMul: {
        --top;
        Dual a = stack[top - 1], b = stack[top];
        stack[top - 1] = {a.v * b.v, a.d * b.v + a.v * b.d};
        break;
      }
      case Op::kDiv: {
        --top;
        Dual a = stack[top - 1], b = stack[top];
        stack[top - 1] = {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)};
        break;
      }
      case Op::kNeg:
        stack[top - 1] = {-stack[top - 1].v, -stack[top - 1].d};
        break;
      case Op::kPow: {
        Dual a = stack[top - 1];
        int n = ins.index;
        double lower = 1.0;  // a^(n-1)
        for (int k = 0; k < n - 1; ++k) lower *= a.v;
        stack[top - 1] = {n == 0 ? 1.0 : lower * a.v, n == 0 ? 0.0 : n * lower * a.d};
        break;
      }
    }
  }
  return top == 1 ? stack[0].d : 0.0;
}

}  // namespace ergodic_hjb
