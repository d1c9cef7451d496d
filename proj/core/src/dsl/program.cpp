#include "rewardevo/dsl/program.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "typing.hpp"

namespace rewardevo::dsl {

// ---------------------------------------------------------------------------
// typing

namespace detail {

std::string describe_shape(int shape) {
  return shape == 0 ? "scalar" : "vector(" + std::to_string(shape) + ")";
}

int infer_shape(const Expr& node, std::span<const int> args, const VarRegistry& registry) {
  const std::string fn(function_name(node.op));
  switch (node.op) {
    case Op::constant:
      if (!std::isfinite(node.value)) throw TypeError("constant must be finite");
      return 0;
    case Op::variable: {
      const VarInfo* info = registry.find(node.name);
      if (!info) throw TypeError("unknown variable " + node.name);
      return info->kind == VarKind::scalar ? 0 : info->dimension;
    }
    case Op::neg:
    case Op::abs:
    case Op::exp:
    case Op::tanh:
    case Op::square:
    case Op::sqrt_safe:
      return args[0];
    case Op::add:
    case Op::sub:
    case Op::mul:
    case Op::div_safe:
    case Op::min:
    case Op::max: {
      const int a = args[0];
      const int b = args[1];
      if (a == 0) return b;
      if (b == 0 || a == b) return a;
      throw TypeError("dimension mismatch: " + describe_shape(a) + " vs " + describe_shape(b));
    }
    case Op::pow:
      if (node.integer < 0 || node.integer > kMaxPowExponent) {
        throw TypeError("pow exponent must be an integer literal in [0, " +
                        std::to_string(kMaxPowExponent) + "]");
      }
      return args[0];
    case Op::norm2:
      if (args[0] == 0) throw TypeError("norm2 expects a vector argument, got scalar");
      return 0;
    case Op::dot:
      if (args[0] == 0 || args[1] == 0) throw TypeError("dot expects vector arguments, got scalar");
      if (args[0] != args[1]) {
        throw TypeError("dimension mismatch: " + describe_shape(args[0]) + " vs " +
                        describe_shape(args[1]));
      }
      return 0;
    case Op::index:
      if (args[0] == 0) throw TypeError("cannot index a scalar");
      if (node.integer < 0 || node.integer >= args[0]) {
        throw TypeError("index " + std::to_string(node.integer) + " out of range for " +
                        describe_shape(args[0]));
      }
      return 0;
    case Op::lt:
    case Op::le:
    case Op::gt:
    case Op::ge:
      if (args[0] != 0 || args[1] != 0) throw TypeError(fn + " expects scalar arguments");
      return 0;
    case Op::clamp:
      if (args[1] != 0 || args[2] != 0) throw TypeError("clamp bounds must be scalars");
      return args[0];
  }
  throw TypeError("unsupported operator");
}

}  // namespace detail

namespace {

std::size_t expected_arity(Op op) {
  switch (op) {
    case Op::constant:
    case Op::variable: return 0;
    case Op::add:
    case Op::sub:
    case Op::mul:
    case Op::div_safe:
    case Op::min:
    case Op::max:
    case Op::dot:
    case Op::lt:
    case Op::le:
    case Op::gt:
    case Op::ge: return 2;
    case Op::clamp: return 3;
    default: return 1;
  }
}

int check_tree(const Expr& e, const VarRegistry& registry) {
  if (e.args.size() != expected_arity(e.op)) throw detail::TypeError("malformed expression node");
  int shapes[3] = {0, 0, 0};
  for (std::size_t i = 0; i < e.args.size(); ++i) shapes[i] = check_tree(e.args[i], registry);
  return detail::infer_shape(e, std::span<const int>(shapes, e.args.size()), registry);
}

// ---------------------------------------------------------------------------
// compiled form: every vector operation is unrolled into scalar instructions
// over a register file whose first flat_size() slots hold the inputs.

enum class ScalarOp : std::uint8_t {
  load, neg, abs, exp, tanh, square, sqrt_safe,
  add, sub, mul, div_safe, min, max, powi,
  lt, le, gt, ge, clamp,
};

struct Instr {
  ScalarOp op;
  int dst;
  int a = 0;
  int b = 0;
  int c = 0;
  double imm = 0.0;
};

inline double saturate(double x) noexcept {
  if (std::isnan(x)) return 0.0;
  return std::clamp(x, -kSaturation, kSaturation);
}

class Compiler {
 public:
  explicit Compiler(const VarRegistry& registry)
      : registry_(registry), next_(registry.flat_size()) {}

  // Registers holding the value of e (one per vector element).
  std::vector<int> emit(const Expr& e) {
    switch (e.op) {
      case Op::constant: {
        int r = fresh();
        code_.push_back({ScalarOp::load, r, 0, 0, 0, e.value});
        return {r};
      }
      case Op::variable: {
        const VarInfo* info = registry_.find(e.name);
        std::vector<int> regs(info->dimension);
        for (int i = 0; i < info->dimension; ++i) regs[i] = info->offset + i;
        return regs;
      }
      case Op::neg: return map1(ScalarOp::neg, e);
      case Op::abs: return map1(ScalarOp::abs, e);
      case Op::exp: return map1(ScalarOp::exp, e);
      case Op::tanh: return map1(ScalarOp::tanh, e);
      case Op::square: return map1(ScalarOp::square, e);
      case Op::sqrt_safe: return map1(ScalarOp::sqrt_safe, e);
      case Op::pow: {
        auto regs = emit(e.args[0]);
        for (int& r : regs) {
          int d = fresh();
          code_.push_back({ScalarOp::powi, d, r, 0, 0, static_cast<double>(e.integer)});
          r = d;
        }
        return regs;
      }
      case Op::add: return map2(ScalarOp::add, e);
      case Op::sub: return map2(ScalarOp::sub, e);
      case Op::mul: return map2(ScalarOp::mul, e);
      case Op::div_safe: return map2(ScalarOp::div_safe, e);
      case Op::min: return map2(ScalarOp::min, e);
      case Op::max: return map2(ScalarOp::max, e);
      case Op::lt: return map2(ScalarOp::lt, e);
      case Op::le: return map2(ScalarOp::le, e);
      case Op::gt: return map2(ScalarOp::gt, e);
      case Op::ge: return map2(ScalarOp::ge, e);
      case Op::norm2: {
        auto v = emit(e.args[0]);
        int acc = op1(ScalarOp::square, v[0]);
        for (std::size_t i = 1; i < v.size(); ++i) {
          acc = op2(ScalarOp::add, acc, op1(ScalarOp::square, v[i]));
        }
        return {op1(ScalarOp::sqrt_safe, acc)};
      }
      case Op::dot: {
        auto a = emit(e.args[0]);
        auto b = emit(e.args[1]);
        int acc = op2(ScalarOp::mul, a[0], b[0]);
        for (std::size_t i = 1; i < a.size(); ++i) {
          acc = op2(ScalarOp::add, acc, op2(ScalarOp::mul, a[i], b[i]));
        }
        return {acc};
      }
      case Op::index: {
        auto v = emit(e.args[0]);
        return {v[static_cast<std::size_t>(e.integer)]};
      }
      case Op::clamp: {
        auto x = emit(e.args[0]);
        int lo = emit(e.args[1])[0];
        int hi = emit(e.args[2])[0];
        for (int& r : x) {
          int d = fresh();
          code_.push_back({ScalarOp::clamp, d, r, lo, hi, 0.0});
          r = d;
        }
        return x;
      }
    }
    throw detail::TypeError("unsupported operator");
  }

  std::vector<Instr> take_code() { return std::move(code_); }
  int register_count() const { return next_; }

 private:
  int fresh() { return next_++; }
  int op1(ScalarOp op, int a) {
    int d = fresh();
    code_.push_back({op, d, a});
    return d;
  }
  int op2(ScalarOp op, int a, int b) {
    int d = fresh();
    code_.push_back({op, d, a, b});
    return d;
  }
  std::vector<int> map1(ScalarOp op, const Expr& e) {
    auto regs = emit(e.args[0]);
    for (int& r : regs) r = op1(op, r);
    return regs;
  }
  std::vector<int> map2(ScalarOp op, const Expr& e) {
    auto a = emit(e.args[0]);
    auto b = emit(e.args[1]);
    const std::size_t n = std::max(a.size(), b.size());
    std::vector<int> out(n);
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = op2(op, a[a.size() == 1 ? 0 : i], b[b.size() == 1 ? 0 : i]);
    }
    return out;
  }

  const VarRegistry& registry_;
  int next_;
  std::vector<Instr> code_;
};

double powi(double x, int n) noexcept {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

}  // namespace

ParseError::ParseError(int line, int column, std::string message)
    : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
      line_(line),
      column_(column),
      message_(std::move(message)) {}

double ProgramOutput::at(std::string_view component) const {
  for (const auto& [name, value] : components) {
    if (name == component) return value;
  }
  throw std::out_of_range("no component named " + std::string(component));
}

struct RewardProgram::Impl {
  std::vector<Component> components;
  VarRegistry registry;
  std::vector<Instr> code;
  std::vector<int> outputs;
  int registers = 0;
};

RewardProgram::RewardProgram(std::vector<Component> components, VarRegistry registry) {
  if (components.empty()) throw ParseError(1, 1, "program has no components");
  std::unordered_set<std::string> names;
  for (std::size_t i = 0; i < components.size(); ++i) {
    const int line = static_cast<int>(i) + 1;
    const auto& c = components[i];
    if (!is_identifier(c.name)) throw ParseError(line, 1, "invalid component name '" + c.name + "'");
    if (!names.insert(c.name).second) throw ParseError(line, 1, "duplicate component name " + c.name);
    if (registry.find(c.name)) {
      throw ParseError(line, 1, "component name " + c.name + " shadows a registered variable");
    }
    try {
      const int shape = check_tree(c.expr, registry);
      if (shape != 0) {
        throw detail::TypeError("component " + c.name + " must evaluate to a scalar, got " +
                                detail::describe_shape(shape));
      }
    } catch (const detail::TypeError& err) {
      throw ParseError(line, 1, err.what());
    }
  }

  auto impl = std::make_shared<Impl>();
  Compiler compiler(registry);
  for (const auto& c : components) impl->outputs.push_back(compiler.emit(c.expr).front());
  impl->code = compiler.take_code();
  impl->registers = compiler.register_count();
  impl->components = std::move(components);
  impl->registry = std::move(registry);
  impl_ = std::move(impl);
}

const std::vector<Component>& RewardProgram::components() const noexcept {
  return impl_->components;
}
const VarRegistry& RewardProgram::registry() const noexcept { return impl_->registry; }

std::vector<std::string> RewardProgram::component_names() const {
  std::vector<std::string> names;
  names.reserve(size());
  for (const auto& c : components()) names.push_back(c.name);
  return names;
}

std::size_t RewardProgram::scratch_size() const noexcept {
  return static_cast<std::size_t>(impl_->registers);
}

double RewardProgram::evaluate_flat(std::span<const double> flat, std::span<double> scratch,
                                    std::span<double> component_values) const {
  const Impl& p = *impl_;
  double* r = scratch.data();
  for (int i = 0; i < p.registry.flat_size(); ++i) r[i] = saturate(flat[static_cast<std::size_t>(i)]);
  for (const Instr& in : p.code) {
    double v = 0.0;
    switch (in.op) {
      case ScalarOp::load: v = in.imm; break;
      case ScalarOp::neg: v = -r[in.a]; break;
      case ScalarOp::abs: v = std::fabs(r[in.a]); break;
      case ScalarOp::exp: v = std::exp(r[in.a]); break;
      case ScalarOp::tanh: v = std::tanh(r[in.a]); break;
      case ScalarOp::square: v = r[in.a] * r[in.a]; break;
      case ScalarOp::sqrt_safe: v = std::sqrt(std::max(r[in.a], 0.0)); break;
      case ScalarOp::add: v = r[in.a] + r[in.b]; break;
      case ScalarOp::sub: v = r[in.a] - r[in.b]; break;
      case ScalarOp::mul: v = r[in.a] * r[in.b]; break;
      case ScalarOp::div_safe: {
        const double y = r[in.b];
        v = r[in.a] / std::max(std::fabs(y), kDivisionFloor);
        if (y < 0.0) v = -v;
        break;
      }
      case ScalarOp::min: v = std::min(r[in.a], r[in.b]); break;
      case ScalarOp::max: v = std::max(r[in.a], r[in.b]); break;
      case ScalarOp::powi: v = powi(r[in.a], static_cast<int>(in.imm)); break;
      case ScalarOp::lt: v = r[in.a] < r[in.b] ? 1.0 : 0.0; break;
      case ScalarOp::le: v = r[in.a] <= r[in.b] ? 1.0 : 0.0; break;
      case ScalarOp::gt: v = r[in.a] > r[in.b] ? 1.0 : 0.0; break;
      case ScalarOp::ge: v = r[in.a] >= r[in.b] ? 1.0 : 0.0; break;
      case ScalarOp::clamp: v = std::min(std::max(r[in.a], r[in.b]), r[in.c]); break;
    }
    r[in.dst] = saturate(v);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < p.outputs.size(); ++i) {
    component_values[i] = r[p.outputs[i]];
    total += component_values[i];
  }
  return total;
}

std::string serialize_program(const RewardProgram& program) {
  std::string out;
  for (const auto& c : program.components()) {
    out += c.name;
    out += " = ";
    out += to_string(c.expr);
    out += '\n';
  }
  return out;
}

std::vector<double> flatten_binding(const VarRegistry& registry, const Binding& binding) {
  std::vector<double> flat(static_cast<std::size_t>(registry.flat_size()));
  for (const auto& var : registry.entries()) {
    auto it = binding.find(var.name);
    if (it == binding.end()) throw EvaluationError("missing binding for variable " + var.name);
    if (static_cast<int>(it->second.size()) != var.dimension) {
      throw EvaluationError("binding for " + var.name + " has " + std::to_string(it->second.size()) +
                            " values, expected " + std::to_string(var.dimension));
    }
    for (int i = 0; i < var.dimension; ++i) {
      const double v = it->second[static_cast<std::size_t>(i)];
      if (!std::isfinite(v)) throw EvaluationError("non-finite value bound to " + var.name);
      flat[static_cast<std::size_t>(var.offset + i)] = v;
    }
  }
  return flat;
}

Binding unflatten_binding(const VarRegistry& registry, std::span<const double> flat) {
  Binding b;
  for (const auto& var : registry.entries()) {
    auto first = flat.begin() + var.offset;
    b.emplace(var.name, std::vector<double>(first, first + var.dimension));
  }
  return b;
}

ProgramOutput evaluate_program(const RewardProgram& program, const Binding& binding) {
  const auto& registry = program.registry();
  // Only the variables the program references must be bound.
  std::vector<std::string> used;
  for (const auto& c : program.components()) collect_variables(c.expr, used);
  Binding complete;
  for (const auto& var : registry.entries()) {
    auto it = binding.find(var.name);
    if (it != binding.end()) {
      complete.emplace(var.name, it->second);
    } else if (std::find(used.begin(), used.end(), var.name) == used.end()) {
      complete.emplace(var.name, std::vector<double>(static_cast<std::size_t>(var.dimension), 0.0));
    }
  }
  const auto flat = flatten_binding(registry, complete);
  std::vector<double> scratch(program.scratch_size());
  std::vector<double> values(program.size());
  ProgramOutput out;
  out.total = program.evaluate_flat(flat, scratch, values);
  for (std::size_t i = 0; i < values.size(); ++i) {
    out.components.emplace_back(program.components()[i].name, values[i]);
  }
  return out;
}

}  // namespace rewardevo::dsl
