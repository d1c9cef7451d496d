#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace rewardevo::dsl {

enum class Op {
  constant,
  variable,
  // unary, elementwise
  neg,
  abs,
  exp,
  tanh,
  square,
  sqrt_safe,
  // binary, elementwise with scalar broadcast
  add,
  sub,
  mul,
  div_safe,
  min,
  max,
  pow,  // constant integer exponent stored in Expr::integer
  // vector
  norm2,
  dot,
  index,  // position stored in Expr::integer
  // comparison indicators, scalar -> 0/1
  lt,
  le,
  gt,
  ge,
  clamp,  // clamp(x, lo, hi)
};

inline constexpr int kMaxPowExponent = 6;

// Immutable-by-convention expression tree with value semantics.
struct Expr {
  Op op = Op::constant;
  double value = 0.0;  // Op::constant
  std::string name;    // Op::variable
  int integer = 0;     // Op::pow exponent, Op::index position
  std::vector<Expr> args;

  friend bool operator==(const Expr&, const Expr&) = default;

  static Expr constant(double v) { return Expr{Op::constant, v, {}, 0, {}}; }
  static Expr variable(std::string n) { return Expr{Op::variable, 0.0, std::move(n), 0, {}}; }
  static Expr unary(Op op, Expr a) { return Expr{op, 0.0, {}, 0, {std::move(a)}}; }
  static Expr binary(Op op, Expr a, Expr b) {
    return Expr{op, 0.0, {}, 0, {std::move(a), std::move(b)}};
  }
  static Expr pow(Expr base, int exponent) {
    return Expr{Op::pow, 0.0, {}, exponent, {std::move(base)}};
  }
  static Expr index(Expr v, int position) {
    return Expr{Op::index, 0.0, {}, position, {std::move(v)}};
  }
  static Expr clamp(Expr x, Expr lo, Expr hi) {
    return Expr{Op::clamp, 0.0, {}, 0, {std::move(x), std::move(lo), std::move(hi)}};
  }
};

// Function-call spelling of an operator ("abs", "norm2", ...), or empty for
// operators with dedicated syntax (constants, variables, + - * /, indexing).
std::string_view function_name(Op op) noexcept;

// Canonical text of a single expression.
std::string to_string(const Expr& e);

int depth(const Expr& e) noexcept;

// Appends every variable name referenced by e (with repetition).
void collect_variables(const Expr& e, std::vector<std::string>& out);

}  // namespace rewardevo::dsl
