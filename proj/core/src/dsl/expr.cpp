#include "rewardevo/dsl/expr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace rewardevo::dsl {

std::string_view function_name(Op op) noexcept {
  switch (op) {
    case Op::abs: return "abs";
    case Op::exp: return "exp";
    case Op::tanh: return "tanh";
    case Op::square: return "square";
    case Op::sqrt_safe: return "sqrt";
    case Op::min: return "min";
    case Op::max: return "max";
    case Op::pow: return "pow";
    case Op::norm2: return "norm2";
    case Op::dot: return "dot";
    case Op::lt: return "lt";
    case Op::le: return "le";
    case Op::gt: return "gt";
    case Op::ge: return "ge";
    case Op::clamp: return "clamp";
    default: return {};
  }
}

namespace {

// Binding strength used to decide where parentheses are needed:
// 1 additive, 2 multiplicative, 3 prefix minus, 4 atoms/calls/indexing.
int precedence(const Expr& e) {
  switch (e.op) {
    case Op::add:
    case Op::sub: return 1;
    case Op::mul:
    case Op::div_safe: return 2;
    case Op::neg: return 3;
    case Op::constant: return std::signbit(e.value) ? 3 : 4;
    default: return 4;
  }
}

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("cannot format constant");
  return std::string(buf, end);
}

void write(const Expr& e, int min_prec, std::string& out);

void write_raw(const Expr& e, std::string& out) {
  switch (e.op) {
    case Op::constant:
      out += format_number(e.value);
      return;
    case Op::variable:
      out += e.name;
      return;
    case Op::neg: {
      const Expr& a = e.args[0];
      out += '-';
      // "-2" would read back as the constant -2, so keep the negation explicit.
      if (a.op == Op::constant && !std::signbit(a.value)) {
        out += '(';
        write(a, 0, out);
        out += ')';
      } else {
        write(a, 3, out);
      }
      return;
    }
    case Op::add:
    case Op::sub:
      write(e.args[0], 1, out);
      out += e.op == Op::add ? " + " : " - ";
      write(e.args[1], 2, out);
      return;
    case Op::mul:
    case Op::div_safe:
      write(e.args[0], 2, out);
      out += e.op == Op::mul ? " * " : " / ";
      write(e.args[1], 3, out);
      return;
    case Op::index:
      write(e.args[0], 4, out);
      out += '[';
      out += std::to_string(e.integer);
      out += ']';
      return;
    case Op::pow:
      out += "pow(";
      write(e.args[0], 0, out);
      out += ", ";
      out += std::to_string(e.integer);
      out += ')';
      return;
    default: {
      out += function_name(e.op);
      out += '(';
      for (std::size_t i = 0; i < e.args.size(); ++i) {
        if (i) out += ", ";
        write(e.args[i], 0, out);
      }
      out += ')';
      return;
    }
  }
}

void write(const Expr& e, int min_prec, std::string& out) {
  if (precedence(e) < min_prec) {
    out += '(';
    write_raw(e, out);
    out += ')';
  } else {
    write_raw(e, out);
  }
}

}  // namespace

std::string to_string(const Expr& e) {
  std::string out;
  write(e, 0, out);
  return out;
}

int depth(const Expr& e) noexcept {
  int d = 0;
  for (const auto& a : e.args) d = std::max(d, depth(a));
  return d + 1;
}

void collect_variables(const Expr& e, std::vector<std::string>& out) {
  if (e.op == Op::variable) out.push_back(e.name);
  for (const auto& a : e.args) collect_variables(a, out);
}

}  // namespace rewardevo::dsl
