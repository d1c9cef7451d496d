#pragma once

#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rewardevo/dsl/expr.hpp"
#include "rewardevo/dsl/registry.hpp"

namespace rewardevo::dsl {

// Raised by parse_program and by RewardProgram construction. The message is
// meant to be read by whoever wrote the program, so it is fed back verbatim.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int column, std::string message);

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }
  const std::string& message() const noexcept { return message_; }

 private:
  int line_;
  int column_;
  std::string message_;
};

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Component {
  std::string name;
  Expr expr;
  friend bool operator==(const Component&, const Component&) = default;
};

// Values keyed by variable name; scalars are one-element vectors.
using Binding = std::map<std::string, std::vector<double>, std::less<>>;

struct ProgramOutput {
  double total = 0.0;
  std::vector<std::pair<std::string, double>> components;  // declaration order

  double at(std::string_view component) const;
};

// Largest magnitude any intermediate or component value may take.
inline constexpr double kSaturation = 1e300;
// Denominator floor used by the guarded division.
inline constexpr double kDivisionFloor = 1e-8;

// A reward program: an ordered list of named components whose sum is the
// reward. Construction type-checks against the registry and compiles the
// components into a flat scalar instruction list; the result is immutable
// and cheap to copy.
class RewardProgram {
 public:
  RewardProgram(std::vector<Component> components, VarRegistry registry);

  const std::vector<Component>& components() const noexcept;
  const VarRegistry& registry() const noexcept;
  std::vector<std::string> component_names() const;
  std::size_t size() const noexcept { return components().size(); }

  // Allocation-free evaluation over a flat binding laid out as in registry().
  // `scratch` must hold scratch_size() values and `component_values` size()
  // values. Returns the total.
  std::size_t scratch_size() const noexcept;
  double evaluate_flat(std::span<const double> flat, std::span<double> scratch,
                       std::span<double> component_values) const;

  friend bool operator==(const RewardProgram& a, const RewardProgram& b) {
    return a.components() == b.components();
  }

  struct Impl;

 private:
  std::shared_ptr<const Impl> impl_;
};

RewardProgram parse_program(std::string_view source, const VarRegistry& registry);

// Canonical text: one "name = expr" line per component, in declaration order,
// each terminated by a newline.
std::string serialize_program(const RewardProgram& program);

// Throws EvaluationError on a missing or mis-sized binding or non-finite input.
ProgramOutput evaluate_program(const RewardProgram& program, const Binding& binding);

// Converts a named binding to the registry's flat layout (same checks as
// evaluate_program).
std::vector<double> flatten_binding(const VarRegistry& registry, const Binding& binding);
Binding unflatten_binding(const VarRegistry& registry, std::span<const double> flat);

}  // namespace rewardevo::dsl
