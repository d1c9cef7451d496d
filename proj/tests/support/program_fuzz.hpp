#pragma once

// Test-only random program generator and an independent tree-walking
// evaluator used as the oracle for the compiled evaluator.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "rewardevo/dsl/program.hpp"

namespace test_support {

namespace dsl = rewardevo::dsl;

inline dsl::VarRegistry fuzz_registry() {
  using dsl::VarKind;
  return dsl::VarRegistry({
      {"x", VarKind::scalar, 1, "scalar x", "m"},
      {"y", VarKind::scalar, 1, "scalar y", "m"},
      {"p", VarKind::vector, 2, "planar point p", "m"},
      {"q", VarKind::vector, 2, "planar point q", "m"},
      {"w", VarKind::vector, 3, "spatial vector w", "m/s"},
      {"u", VarKind::vector, 1, "one-element vector u", ""},
  });
}

class ProgramFuzzer {
 public:
  explicit ProgramFuzzer(std::uint64_t seed) : rng_(seed) {}

  double constant() {
    const double pick = unit();
    if (pick < 0.1) {
      static constexpr double specials[] = {0.0, -0.0, 1.0, -1.0, 0.5, 2.0};
      return specials[index(std::size(specials))];
    }
    if (pick < 0.3) {
      const double mag = std::pow(10.0, uniform(-300.0, 300.0));
      return unit() < 0.5 ? -mag : mag;
    }
    return uniform(-10.0, 10.0);
  }

  // shape: 0 scalar, n vector(n)
  dsl::Expr expr(int shape, int budget) {
    using dsl::Expr;
    using dsl::Op;
    if (budget <= 0 || unit() < 0.25) return leaf(shape);
    if (shape == 0) {
      switch (index(9)) {
        case 0: return Expr::unary(unary_op(), expr(0, budget - 1));
        case 1: return Expr::binary(binary_op(), expr(0, budget - 1), expr(0, budget - 1));
        case 2: return Expr::pow(expr(0, budget - 1), static_cast<int>(index(7)));
        case 3: {
          int n = vector_dim();
          return Expr::unary(Op::norm2, expr(n, budget - 1));
        }
        case 4: {
          int n = vector_dim();
          return Expr::binary(Op::dot, expr(n, budget - 1), expr(n, budget - 1));
        }
        case 5: {
          int n = vector_dim();
          return Expr::index(expr(n, budget - 1), static_cast<int>(index(static_cast<std::size_t>(n))));
        }
        case 6: {
          static constexpr Op cmp[] = {Op::lt, Op::le, Op::gt, Op::ge};
          return Expr::binary(cmp[index(4)], expr(0, budget - 1), expr(0, budget - 1));
        }
        case 7:
          return Expr::clamp(expr(0, budget - 1), expr(0, budget - 1), expr(0, budget - 1));
        default:
          return Expr::unary(Op::neg, expr(0, budget - 1));
      }
    }
    switch (index(5)) {
      case 0: return Expr::unary(unary_op(), expr(shape, budget - 1));
      case 1: return Expr::binary(binary_op(), expr(shape, budget - 1), expr(shape, budget - 1));
      case 2: {
        // scalar broadcast on either side
        if (unit() < 0.5) return Expr::binary(binary_op(), expr(0, budget - 1), expr(shape, budget - 1));
        return Expr::binary(binary_op(), expr(shape, budget - 1), expr(0, budget - 1));
      }
      case 3: return Expr::pow(expr(shape, budget - 1), static_cast<int>(index(7)));
      default: return Expr::clamp(expr(shape, budget - 1), expr(0, budget - 1), expr(0, budget - 1));
    }
  }

  std::vector<dsl::Component> components(int count, int budget) {
    std::vector<dsl::Component> out;
    for (int i = 0; i < count; ++i) out.push_back({"c" + std::to_string(i), expr(0, budget)});
    return out;
  }

  dsl::RewardProgram program(const dsl::VarRegistry& registry) {
    return dsl::RewardProgram(components(1 + static_cast<int>(index(4)), 1 + static_cast<int>(index(6))),
                              registry);
  }

  // Finite binding with occasional extreme magnitudes.
  dsl::Binding binding(const dsl::VarRegistry& registry) {
    dsl::Binding b;
    for (const auto& var : registry.entries()) {
      std::vector<double> values(static_cast<std::size_t>(var.dimension));
      for (double& v : values) {
        const double pick = unit();
        if (pick < 0.05) v = std::numeric_limits<double>::max() * (unit() < 0.5 ? -1 : 1);
        else if (pick < 0.1) v = 0.0;
        else if (pick < 0.25) v = std::pow(10.0, uniform(-300.0, 300.0)) * (unit() < 0.5 ? -1 : 1);
        else v = uniform(-5.0, 5.0);
      }
      b.emplace(var.name, std::move(values));
    }
    return b;
  }

 private:
  double unit() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  int vector_dim() {
    static constexpr int dims[] = {1, 2, 3};
    return dims[index(3)];
  }
  dsl::Op unary_op() {
    using dsl::Op;
    static constexpr Op ops[] = {Op::neg, Op::abs, Op::exp, Op::tanh, Op::square, Op::sqrt_safe};
    return ops[index(std::size(ops))];
  }
  dsl::Op binary_op() {
    using dsl::Op;
    static constexpr Op ops[] = {Op::add, Op::sub, Op::mul, Op::div_safe, Op::min, Op::max};
    return ops[index(std::size(ops))];
  }
  dsl::Expr leaf(int shape) {
    using dsl::Expr;
    if (shape == 0) {
      switch (index(4)) {
        case 0: return Expr::variable("x");
        case 1: return Expr::variable("y");
        case 2: return Expr::index(Expr::variable("w"), static_cast<int>(index(3)));
        default: return Expr::constant(constant());
      }
    }
    if (shape == 1) return Expr::variable("u");
    if (shape == 2) return Expr::variable(unit() < 0.5 ? "p" : "q");
    return Expr::variable("w");
  }

  std::mt19937_64 rng_;
};

// Reference semantics written directly from the language definition.
class ReferenceEvaluator {
 public:
  explicit ReferenceEvaluator(const dsl::Binding& binding) : binding_(binding) {}

  std::vector<double> eval(const dsl::Expr& e) const {
    using dsl::Op;
    switch (e.op) {
      case Op::constant: return {sat(e.value)};
      case Op::variable: {
        auto v = binding_.at(e.name);
        for (double& x : v) x = sat(x);
        return v;
      }
      case Op::neg: return map(e, [](double a) { return -a; });
      case Op::abs: return map(e, [](double a) { return std::fabs(a); });
      case Op::exp: return map(e, [](double a) { return std::exp(a); });
      case Op::tanh: return map(e, [](double a) { return std::tanh(a); });
      case Op::square: return map(e, [](double a) { return a * a; });
      case Op::sqrt_safe: return map(e, [](double a) { return std::sqrt(a > 0 ? a : 0.0); });
      case Op::pow: {
        const int n = e.integer;
        return map(e, [n](double a) { return std::pow(a, n); });
      }
      case Op::add: return zip(e, [](double a, double b) { return a + b; });
      case Op::sub: return zip(e, [](double a, double b) { return a - b; });
      case Op::mul: return zip(e, [](double a, double b) { return a * b; });
      case Op::div_safe:
        return zip(e, [](double x, double y) {
          const double sign = y < 0 ? -1.0 : 1.0;
          return x / std::max(std::fabs(y), 1e-8) * sign;
        });
      case Op::min: return zip(e, [](double a, double b) { return a < b ? a : b; });
      case Op::max: return zip(e, [](double a, double b) { return a > b ? a : b; });
      case Op::lt: return zip(e, [](double a, double b) { return a < b ? 1.0 : 0.0; });
      case Op::le: return zip(e, [](double a, double b) { return a <= b ? 1.0 : 0.0; });
      case Op::gt: return zip(e, [](double a, double b) { return a > b ? 1.0 : 0.0; });
      case Op::ge: return zip(e, [](double a, double b) { return a >= b ? 1.0 : 0.0; });
      case Op::norm2: {
        double acc = 0.0;
        bool first = true;
        for (double v : eval(e.args[0])) {
          acc = first ? sat(v * v) : sat(acc + sat(v * v));
          first = false;
        }
        return {sat(std::sqrt(acc > 0 ? acc : 0.0))};
      }
      case Op::dot: {
        auto a = eval(e.args[0]);
        auto b = eval(e.args[1]);
        double acc = sat(a[0] * b[0]);
        for (std::size_t i = 1; i < a.size(); ++i) acc = sat(acc + sat(a[i] * b[i]));
        return {acc};
      }
      case Op::index: return {eval(e.args[0]).at(static_cast<std::size_t>(e.integer))};
      case Op::clamp: {
        auto x = eval(e.args[0]);
        const double lo = eval(e.args[1])[0];
        const double hi = eval(e.args[2])[0];
        for (double& v : x) v = sat(std::min(std::max(v, lo), hi));
        return x;
      }
    }
    return {};
  }

  static double sat(double v) {
    if (std::isnan(v)) return 0.0;
    return std::clamp(v, -1e300, 1e300);
  }

 private:
  template <class F>
  std::vector<double> map(const dsl::Expr& e, F f) const {
    auto v = eval(e.args[0]);
    for (double& x : v) x = sat(f(x));
    return v;
  }
  template <class F>
  std::vector<double> zip(const dsl::Expr& e, F f) const {
    auto a = eval(e.args[0]);
    auto b = eval(e.args[1]);
    const std::size_t n = std::max(a.size(), b.size());
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = sat(f(a[a.size() == 1 ? 0 : i], b[b.size() == 1 ? 0 : i]));
    return out;
  }

  const dsl::Binding& binding_;
};

}  // namespace test_support
