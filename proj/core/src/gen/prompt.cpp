#include <regex>

#include "rewardevo/gen/generator.hpp"

namespace rewardevo::gen {
namespace {

constexpr std::string_view kSystemPrompt =
    R"(You are a reward engineer. You write reward programs that let a reinforcement learning agent learn the task described by the user.

A reward program is a list of named components, one per line, written as
    name = expression
The reward at each step is the sum of all components. Component names must be identifiers and must differ from the variable names.

Expressions may use:
- the variables listed in the environment description; vector variables can be indexed as v[0], v[1], ...
- numbers, parentheses and the operators + - * /
- functions: abs, exp, tanh, square, sqrt, min, max, pow(x, n) with an integer n from 0 to 6,
  norm2(v), dot(u, v), clamp(x, lo, hi), and the comparisons lt, le, gt, ge, which return 1 or 0
Arithmetic on vectors works element by element and a scalar may be combined with a vector. Every component must evaluate to a scalar. Division and sqrt are guarded, so they never fail.

Good reward programs give the agent a dense learning signal that leads towards success, with components on sensible scales.)";

constexpr std::string_view kFormattingTip =
    "Reply with the complete reward program inside a single fenced code block. "
    "Write one component per line as `name = expression` and use only the variables listed above.";

// Sum of all component expressions as one expression tree.
dsl::Expr summed(const dsl::RewardProgram& program) {
  const auto& components = program.components();
  dsl::Expr total = components.front().expr;
  for (std::size_t i = 1; i < components.size(); ++i) {
    total = dsl::Expr::binary(dsl::Op::add, std::move(total), components[i].expr);
  }
  return total;
}

}  // namespace

std::vector<ChatMessage> PromptBundle::messages() const {
  return {{"system", system}, {"user", user + "\n\n" + formatting_tip}};
}

std::string render_prior_program(const PriorCandidate& prior, bool expose_components) {
  if (expose_components || !prior.program) return prior.program_text;
  return "reward = " + dsl::to_string(summed(*prior.program)) + "\n";
}

PromptBundle assemble_prompt(const GeneratorContext& ctx) {
  PromptBundle bundle;
  bundle.system = std::string(kSystemPrompt);
  bundle.formatting_tip = std::string(kFormattingTip);

  std::string user = "The environment is described below.\n\n" + ctx.env_context + "\nThe task is: " +
                     ctx.task_description + "\n";
  if (ctx.prior) {
    std::string program = render_prior_program(*ctx.prior, ctx.expose_components);
    if (!program.empty() && program.back() != '\n') program += '\n';
    user += "\nThis is the best reward program found so far:\n```\n" + program + "```\n\n" + ctx.prior->feedback;
    if (!user.empty() && user.back() != '\n') user += '\n';
  } else {
    user += "\nWrite a reward program for this task.\n";
  }
  bundle.user = std::move(user);
  return bundle;
}

std::string extract_program_text(std::string_view response) {
  const std::string text(response);
  if (auto open = text.find("```"); open != std::string::npos) {
    const auto line_end = text.find('\n', open);
    const auto body_start = line_end == std::string::npos ? text.size() : line_end + 1;
    auto close = text.find("```", body_start);
    if (close == std::string::npos) close = text.size();
    std::string body = text.substr(body_start, close - body_start);
    while (!body.empty() && (body.back() == '\n' || body.back() == ' ' || body.back() == '\r')) body.pop_back();
    if (!body.empty()) return body;
  }

  static const std::regex assignment(R"(^\s*[A-Za-z_][A-Za-z0-9_]*\s*=[^=].*$)");
  std::string out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (std::regex_match(line, assignment)) {
      if (!out.empty()) out += '\n';
      out += line;
    }
    start = end + 1;
  }
  if (out.empty()) throw ExtractionError("no reward program found in the response");
  return out;
}

Proposal make_proposal(std::string raw_text, const dsl::VarRegistry& registry) {
  Proposal p;
  p.raw_text = std::move(raw_text);
  try {
    p.program_text = extract_program_text(p.raw_text);
  } catch (const ExtractionError& err) {
    p.error = dsl::ParseError(1, 1, err.what());
    return p;
  }
  try {
    p.program = dsl::parse_program(p.program_text, registry);
    p.program_text = dsl::serialize_program(*p.program);
  } catch (const dsl::ParseError& err) {
    p.error = err;
  }
  return p;
}

}  // namespace rewardevo::gen
