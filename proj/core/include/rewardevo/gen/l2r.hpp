#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rewardevo/gen/generator.hpp"
#include "rewardevo/gen/llm.hpp"

namespace rewardevo::gen {

enum class PrimitiveKind { min_dist, max_dist, inv_dist, exp_sq_diff, abs_diff, duration_style };

std::string_view to_string(PrimitiveKind kind) noexcept;

// Operand: a registry variable, an indexed vector element, or a constant.
struct Operand {
  std::string variable;  // empty for constants
  int index = -1;        // element of a vector variable, -1 for the whole value
  double constant = 0.0;

  std::string text() const;
  friend bool operator==(const Operand&, const Operand&) = default;
};

// One reward API call:
//   min_dist       -||a - b||
//   max_dist        ||a - b||
//   inv_dist        1 / (1 + ||a - b||)
//   exp_sq_diff     exp(-(a - b)^2)
//   abs_diff       -|a - b|
//   duration_style -(a - b)^2
struct L2RPrimitive {
  PrimitiveKind kind = PrimitiveKind::min_dist;
  Operand a;
  Operand b;
  int dimension = 0;  // 0 when a is scalar, else the vector length of a
  double scale = 1.0;

  std::string expression() const;  // DSL form
  friend bool operator==(const L2RPrimitive&, const L2RPrimitive&) = default;
};

class L2RError : public GeneratorError {
 public:
  using GeneratorError::GeneratorError;
};

// Direct evaluation, independent of the DSL. Throws L2RError for operands
// missing from the binding.
double primitive_value(const L2RPrimitive& primitive, const dsl::Binding& binding);

// Motion-description statements understood by the second stage:
//   Set the distance between A and B to be minimal.   -> min_dist
//   Set the distance between A and B to be maximal.   -> max_dist
//   Keep A close to B.                                -> inv_dist
//   Keep A near V.                                    -> exp_sq_diff
//   Keep A at V.                                      -> abs_diff
//   Hold A steady at V.                               -> duration_style
// Throws L2RError for unknown statements, objects or shape mismatches.
L2RPrimitive parse_statement(std::string_view statement, const dsl::VarRegistry& registry);

// Shipped motion-description template for an environment.
const std::vector<std::string>& l2r_template(std::string_view env_id);

// One component per primitive, in order.
dsl::RewardProgram l2r_program(const std::vector<L2RPrimitive>& primitives, const dsl::VarRegistry& registry);

// Stage one: choose template statements.
class StatementSelector {
 public:
  virtual ~StatementSelector() = default;
  // Motion description text, one statement per line.
  virtual std::string select(const GeneratorContext& ctx, const std::vector<std::string>& statements,
                             std::size_t sample, double temperature) = 0;
};

// Seeded chooser used offline: each statement is kept with probability one
// half, at least one is always kept.
class MockStatementSelector final : public StatementSelector {
 public:
  std::string select(const GeneratorContext& ctx, const std::vector<std::string>& statements, std::size_t sample,
                     double temperature) override;
};

class LlmStatementSelector final : public StatementSelector {
 public:
  explicit LlmStatementSelector(LlmConfig config) : client_(std::move(config)) {}
  std::string select(const GeneratorContext& ctx, const std::vector<std::string>& statements, std::size_t sample,
                     double temperature) override;

 private:
  ChatClient client_;
};

class L2RGenerator final : public Generator {
 public:
  explicit L2RGenerator(std::unique_ptr<StatementSelector> selector) : selector_(std::move(selector)) {}
  std::string_view kind() const noexcept override { return "l2r"; }
  std::vector<Proposal> propose(const GeneratorContext& ctx, int k, double temperature) override;

 private:
  std::unique_ptr<StatementSelector> selector_;
};

}  // namespace rewardevo::gen
