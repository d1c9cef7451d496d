#include "rewardevo/gen/l2r.hpp"

#include <cctype>
#include <cmath>
#include <map>
#include <regex>
#include <set>

#include <fmt/format.h>

#include "rewardevo/util/random.hpp"

namespace rewardevo::gen {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// Strips list markers such as "- ", "* ", "3. " or "3) ".
std::string strip_marker(const std::string& line) {
  static const std::regex marker(R"(^\s*(?:[-*]|\d+[.)])\s+)");
  return trim(std::regex_replace(line, marker, "", std::regex_constants::format_first_only));
}

Operand parse_operand(const std::string& token, const dsl::VarRegistry& registry, int& dimension) {
  Operand op;
  if (!token.empty() && (std::isdigit(static_cast<unsigned char>(token[0])) || token[0] == '-' || token[0] == '.')) {
    try {
      std::size_t used = 0;
      op.constant = std::stod(token, &used);
      if (used != token.size() || !std::isfinite(op.constant)) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      throw L2RError("invalid number " + token);
    }
    dimension = -1;
    return op;
  }
  static const std::regex shape(R"(^([A-Za-z_][A-Za-z0-9_]*)(?:\[(\d+)\])?$)");
  std::smatch m;
  if (!std::regex_match(token, m, shape)) throw L2RError("invalid object " + token);
  op.variable = m[1].str();
  const auto* var = registry.find(op.variable);
  if (var == nullptr) throw L2RError("unknown object " + op.variable);
  if (m[2].matched) {
    op.index = std::stoi(m[2].str());
    if (var->kind != dsl::VarKind::vector || op.index >= var->dimension) {
      throw L2RError("index out of range for " + op.variable);
    }
    dimension = 0;
  } else {
    dimension = var->kind == dsl::VarKind::vector ? var->dimension : 0;
  }
  return op;
}

std::vector<double> operand_values(const Operand& op, const dsl::Binding& binding) {
  if (op.variable.empty()) return {op.constant};
  auto it = binding.find(op.variable);
  if (it == binding.end()) throw L2RError("no binding for " + op.variable);
  if (op.index < 0) return it->second;
  if (static_cast<std::size_t>(op.index) >= it->second.size()) throw L2RError("index out of range for " + op.variable);
  return {it->second[static_cast<std::size_t>(op.index)]};
}

const std::map<std::string, std::vector<std::string>, std::less<>>& templates() {
  static const auto table = [] {
    const std::vector<std::string> pointmass = {
        "Set the distance between pos and target to be minimal.",
        "Set the distance between pos and target to be maximal.",
        "Keep pos close to target.",
        "Keep dist near 0.",
        "Keep vel[0] at 0.",
        "Keep vel[1] at 0.",
    };
    std::map<std::string, std::vector<std::string>, std::less<>> m;
    m.emplace("cartpole", std::vector<std::string>{
                              "Hold pole_angle steady at 0 radians.",
                              "Keep pole_angle near 0.",
                              "Keep pole_vel at 0.",
                              "Keep cart_vel at 0.",
                              "Keep cart_pos at 0.",
                          });
    m.emplace("pointmass_reach", pointmass);
    m.emplace("reach_success", pointmass);
    m.emplace("waypoint_relay", pointmass);
    return m;
  }();
  return table;
}

bool looks_like_statement(const std::string& line) {
  std::string lower;
  for (char c : line) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return lower.starts_with("set ") || lower.starts_with("keep ") || lower.starts_with("hold ");
}

}  // namespace

std::string_view to_string(PrimitiveKind kind) noexcept {
  switch (kind) {
    case PrimitiveKind::min_dist: return "min_dist";
    case PrimitiveKind::max_dist: return "max_dist";
    case PrimitiveKind::inv_dist: return "inv_dist";
    case PrimitiveKind::exp_sq_diff: return "exp_sq_diff";
    case PrimitiveKind::abs_diff: return "abs_diff";
    case PrimitiveKind::duration_style: return "duration_style";
  }
  return "unknown";
}

std::string Operand::text() const {
  if (variable.empty()) return fmt::format("{}", constant);
  if (index >= 0) return fmt::format("{}[{}]", variable, index);
  return variable;
}

std::string L2RPrimitive::expression() const {
  const std::string diff = fmt::format("({} - {})", a.text(), b.text());
  const std::string norm = dimension > 0 ? "norm2" + diff : "abs" + diff;
  std::string body;
  switch (kind) {
    case PrimitiveKind::min_dist: body = "-" + norm; break;
    case PrimitiveKind::max_dist: body = norm; break;
    case PrimitiveKind::inv_dist: body = "1 / (1 + " + norm + ")"; break;
    case PrimitiveKind::exp_sq_diff: body = "exp(-square" + diff + ")"; break;
    case PrimitiveKind::abs_diff: body = "-abs" + diff; break;
    case PrimitiveKind::duration_style: body = "-square" + diff; break;
  }
  if (scale == 1.0) return body;
  return fmt::format("{} * ({})", scale, body);
}

double primitive_value(const L2RPrimitive& p, const dsl::Binding& binding) {
  const auto a = operand_values(p.a, binding);
  const auto b = operand_values(p.b, binding);
  if (a.size() != b.size() && b.size() != 1) throw L2RError("operand shapes differ");
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[b.size() == 1 ? 0 : i];
    sq += d * d;
  }
  const double norm = std::sqrt(sq);
  double v = 0.0;
  switch (p.kind) {
    case PrimitiveKind::min_dist: v = -norm; break;
    case PrimitiveKind::max_dist: v = norm; break;
    case PrimitiveKind::inv_dist: v = 1.0 / (1.0 + norm); break;
    case PrimitiveKind::exp_sq_diff: v = std::exp(-sq); break;
    case PrimitiveKind::abs_diff: v = -norm; break;
    case PrimitiveKind::duration_style: v = -sq; break;
  }
  return p.scale * v;
}

L2RPrimitive parse_statement(std::string_view statement, const dsl::VarRegistry& registry) {
  static const std::regex distance(R"(^set the distance between (\S+) and (\S+) to be (minimal|maximal)\.?$)",
                                   std::regex::icase);
  static const std::regex close(R"(^keep (\S+) close to (\S+?)\.?$)", std::regex::icase);
  static const std::regex near(R"(^keep (\S+) near (\S+?)(?: [A-Za-z]+)?\.?$)", std::regex::icase);
  static const std::regex at(R"(^keep (\S+) at (\S+?)(?: [A-Za-z]+)?\.?$)", std::regex::icase);
  static const std::regex hold(R"(^hold (\S+) steady at (\S+?)(?: [A-Za-z]+)?\.?$)", std::regex::icase);

  const std::string s = trim(statement);
  std::smatch m;
  L2RPrimitive p;
  bool pairwise = false;
  if (std::regex_match(s, m, distance)) {
    p.kind = std::tolower(static_cast<unsigned char>(m[3].str()[1])) == 'i' ? PrimitiveKind::min_dist
                                                                             : PrimitiveKind::max_dist;
    pairwise = true;
  } else if (std::regex_match(s, m, close)) {
    p.kind = PrimitiveKind::inv_dist;
    pairwise = true;
  } else if (std::regex_match(s, m, hold)) {
    p.kind = PrimitiveKind::duration_style;
  } else if (std::regex_match(s, m, near)) {
    p.kind = PrimitiveKind::exp_sq_diff;
  } else if (std::regex_match(s, m, at)) {
    p.kind = PrimitiveKind::abs_diff;
  } else {
    throw L2RError("unrecognized statement: " + s);
  }

  int dim_a = 0;
  int dim_b = 0;
  p.a = parse_operand(m[1].str(), registry, dim_a);
  p.b = parse_operand(m[2].str(), registry, dim_b);
  if (dim_a < 0) throw L2RError("the first object must be a variable: " + s);
  if (!pairwise && dim_a != 0) throw L2RError(p.a.text() + " must be a scalar in: " + s);
  if (dim_b >= 0 && dim_b != dim_a) throw L2RError("objects have different shapes in: " + s);
  p.dimension = dim_a;
  return p;
}

const std::vector<std::string>& l2r_template(std::string_view env_id) {
  const auto& table = templates();
  auto it = table.find(env_id);
  if (it == table.end()) throw L2RError("no motion template for environment " + std::string(env_id));
  return it->second;
}

dsl::RewardProgram l2r_program(const std::vector<L2RPrimitive>& primitives, const dsl::VarRegistry& registry) {
  if (primitives.empty()) throw L2RError("motion description selects no statements");
  std::set<std::string> used;
  std::string source;
  for (const auto& p : primitives) {
    std::string base = std::string(to_string(p.kind)) + "_" + p.a.variable + (p.a.index >= 0 ? std::to_string(p.a.index) : "");
    if (!p.b.variable.empty()) base += "_" + p.b.variable;
    std::string name = base;
    for (int n = 2; used.count(name) != 0; ++n) name = fmt::format("{}_{}", base, n);
    used.insert(name);
    source += name + " = " + p.expression() + "\n";
  }
  return dsl::parse_program(source, registry);
}

std::string MockStatementSelector::select(const GeneratorContext& ctx, const std::vector<std::string>& statements,
                                          std::size_t sample, double /*temperature*/) {
  auto rng = make_rng(derive_seed(ctx.sample_seed, {hash_label("l2r"), sample}));
  std::bernoulli_distribution keep(0.5);
  std::vector<std::string> chosen;
  for (const auto& s : statements) {
    if (keep(rng)) chosen.push_back(s);
  }
  if (chosen.empty()) {
    chosen.push_back(statements[std::uniform_int_distribution<std::size_t>(0, statements.size() - 1)(rng)]);
  }
  std::string out;
  for (const auto& s : chosen) out += s + "\n";
  return out;
}

std::string LlmStatementSelector::select(const GeneratorContext& ctx, const std::vector<std::string>& statements,
                                         std::size_t /*sample*/, double temperature) {
  std::string user = "Task: " + ctx.task_description + "\n\nDescribe the motion for this task by choosing statements "
                     "from the template below. Copy each chosen statement on its own line; you may change the "
                     "numbers. Do not write anything else.\n\nTemplate:\n";
  for (const auto& s : statements) user += "- " + s + "\n";
  const std::vector<ChatMessage> messages = {
      {"system", "You describe the motion an agent should perform by filling in a motion description template."},
      {"user", user}};
  return client_.complete(messages, 1, temperature).front();
}

std::vector<Proposal> L2RGenerator::propose(const GeneratorContext& ctx, int k, double temperature) {
  if (k < 1) throw GeneratorError("k must be at least 1");
  const auto& statements = l2r_template(ctx.env_id);
  std::vector<Proposal> out;
  for (int i = 0; i < k; ++i) {
    Proposal p;
    p.raw_text = selector_->select(ctx, statements, static_cast<std::size_t>(i), temperature);
    std::vector<L2RPrimitive> primitives;
    int line_no = 0;
    try {
      std::size_t start = 0;
      while (start < p.raw_text.size()) {
        std::size_t end = p.raw_text.find('\n', start);
        if (end == std::string::npos) end = p.raw_text.size();
        ++line_no;
        const std::string line = strip_marker(p.raw_text.substr(start, end - start));
        if (looks_like_statement(line)) primitives.push_back(parse_statement(line, ctx.registry));
        start = end + 1;
      }
      auto program = l2r_program(primitives, ctx.registry);
      p.program_text = dsl::serialize_program(program);
      p.program = std::move(program);
    } catch (const L2RError& err) {
      p.error = dsl::ParseError(std::max(line_no, 1), 1, err.what());
    } catch (const dsl::ParseError& err) {
      p.error = err;
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace rewardevo::gen
