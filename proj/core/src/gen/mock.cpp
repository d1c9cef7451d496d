#include "rewardevo/gen/mock.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "rewardevo/util/random.hpp"

namespace rewardevo::gen {
namespace {

struct DistanceTerm {
  std::string expr;
  std::string prev;  // previous-step value of the same distance, if exposed
  std::string stem;
};

struct PenaltyTerm {
  std::string expr;
  std::string stem;
};

struct Vocabulary {
  std::vector<DistanceTerm> distances;
  std::vector<PenaltyTerm> penalties;
  std::vector<std::string> scalars;
  std::set<std::string, std::less<>> variables;
};

bool contains(std::string_view s, std::string_view part) { return s.find(part) != std::string_view::npos; }

Vocabulary build_vocabulary(const dsl::VarRegistry& registry) {
  Vocabulary v;
  const auto& vars = registry.entries();
  for (const auto& var : vars) {
    v.variables.insert(var.name);
    if (var.kind == dsl::VarKind::scalar) {
      v.scalars.push_back(var.name);
    } else {
      for (int i = 0; i < var.dimension; ++i) v.scalars.push_back(fmt::format("{}[{}]", var.name, i));
    }
  }
  for (const auto& var : vars) {
    const bool velocity = contains(var.name, "vel");
    if (var.name == "action") {
      if (var.kind == dsl::VarKind::vector) {
        v.penalties.push_back({"dot(action, action)", "action"});
        v.penalties.push_back({"norm2(action)", "action"});
      } else {
        v.penalties.push_back({"square(action)", "action"});
      }
      continue;
    }
    if (velocity) {
      if (var.kind == dsl::VarKind::vector) {
        v.penalties.push_back({fmt::format("dot({0}, {0})", var.name), var.name});
        v.penalties.push_back({fmt::format("norm2({})", var.name), var.name});
      } else {
        v.penalties.push_back({fmt::format("square({})", var.name), var.name});
        v.penalties.push_back({fmt::format("abs({})", var.name), var.name});
      }
      continue;
    }
    if (var.kind != dsl::VarKind::scalar || var.name.starts_with("prev_")) continue;
    if (contains(var.name, "dist")) {
      const std::string prev = "prev_" + var.name;
      v.distances.push_back({var.name, registry.find(prev) ? prev : "", var.name});
    } else {
      v.distances.push_back({fmt::format("abs({})", var.name), "", var.name});
    }
  }
  for (std::size_t a = 0; a < vars.size(); ++a) {
    for (std::size_t b = a + 1; b < vars.size(); ++b) {
      const auto& x = vars[a];
      const auto& y = vars[b];
      if (x.kind != dsl::VarKind::vector || y.kind != dsl::VarKind::vector || x.dimension != y.dimension) continue;
      if (x.units.empty() || x.units != y.units || x.name == "action" || y.name == "action") continue;
      if (contains(x.name, "vel") || contains(y.name, "vel")) continue;
      v.distances.push_back({fmt::format("norm2({} - {})", x.name, y.name), "", x.name + "_" + y.name});
    }
  }
  return v;
}

struct DraftComponent {
  std::string name;
  std::string expr;
};

class Sampler {
 public:
  Sampler(const Vocabulary& vocab, const MockGenerator::Options& options, Rng& rng)
      : vocab_(vocab), options_(options), rng_(rng) {}

  double unit() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  template <class T, std::size_t N>
  T pick(const T (&values)[N]) {
    return values[index(N)];
  }

  DraftComponent component() {
    const double r = unit();
    if (r < options_.idiom_share && !vocab_.distances.empty()) return idiom();
    if (r < options_.idiom_share + options_.penalty_share && !vocab_.penalties.empty()) return penalty();
    return random_component();
  }

  DraftComponent idiom() {
    const auto& d = vocab_.distances[index(vocab_.distances.size())];
    static constexpr double coefs[] = {0.5, 1.0, 2.0, 5.0, 10.0};
    static constexpr double shapes[] = {1.0, 2.0, 5.0, 10.0};
    static constexpr double thresholds[] = {0.05, 0.1, 0.2};
    const double c = pick(coefs);
    switch (index(8)) {
      case 0: return {d.stem + "_penalty", scaled(-c, d.expr)};
      case 1: return {d.stem + "_sq_penalty", scaled(-c, "square(" + d.expr + ")")};
      case 2: return {d.stem + "_closeness", scaled(c, fmt::format("exp({} * {})", number(-pick(shapes)), d.expr))};
      case 3:
        if (!d.prev.empty()) return {d.stem + "_progress", scaled(c, fmt::format("({} - {})", d.prev, d.expr))};
        return {d.stem + "_penalty", scaled(-c, d.expr)};
      case 4: return {d.stem + "_bonus", scaled(c, fmt::format("lt({}, {})", d.expr, number(pick(thresholds))))};
      case 5: return {d.stem + "_sqrt_penalty", scaled(-c, "sqrt(" + d.expr + ")")};
      case 6: return {d.stem + "_inverse", fmt::format("{} / ({} + 0.1)", number(c * 0.1), d.expr)};
      default: return {"alive_bonus", number(c)};
    }
  }

  DraftComponent penalty() {
    const auto& p = vocab_.penalties[index(vocab_.penalties.size())];
    static constexpr double weights[] = {0.01, 0.05, 0.1, 0.5};
    return {p.stem + "_penalty", scaled(-pick(weights), p.expr)};
  }

  DraftComponent random_component() { return {"shaping_term", random_expr(2)}; }

  std::string random_expr(int depth) {
    if (depth == 0 || unit() < 0.3) {
      if (unit() < 0.25) return number(std::round(std::uniform_real_distribution<double>(-3.0, 3.0)(rng_) * 100) / 100);
      return vocab_.scalars[index(vocab_.scalars.size())];
    }
    static constexpr const char* unary[] = {"abs", "exp", "tanh", "square", "sqrt"};
    static constexpr const char* binary[] = {"+", "-", "*"};
    switch (index(4)) {
      case 0: return fmt::format("{}({})", pick(unary), random_expr(depth - 1));
      case 1: return fmt::format("({} {} {})", random_expr(depth - 1), pick(binary), random_expr(depth - 1));
      case 2: return fmt::format("{}({}, {})", unit() < 0.5 ? "min" : "max", random_expr(depth - 1), random_expr(depth - 1));
      default: return fmt::format("pow({}, {})", random_expr(depth - 1), 1 + index(3));
    }
  }

  static std::string number(double v) { return fmt::format("{}", v); }

  static std::string scaled(double c, const std::string& expr) {
    if (c == 1.0) return expr;
    if (c == -1.0) return "-" + expr;
    return fmt::format("{} * {}", number(c), expr);
  }

 private:
  const Vocabulary& vocab_;
  const MockGenerator::Options& options_;
  Rng& rng_;
};

double round_sig(double v) { return std::stod(fmt::format("{:.4g}", v)); }

std::string rescaled(const dsl::Expr& e, double factor) {
  using dsl::Expr;
  using dsl::Op;
  if (e.op == Op::mul && e.args[0].op == Op::constant) {
    return dsl::to_string(Expr::binary(Op::mul, Expr::constant(round_sig(e.args[0].value * factor)), e.args[1]));
  }
  if (e.op == Op::neg) return dsl::to_string(Expr::binary(Op::mul, Expr::constant(-factor), e.args[0]));
  if (e.op == Op::constant) return dsl::to_string(Expr::constant(round_sig(e.value * factor)));
  return dsl::to_string(Expr::binary(Op::mul, Expr::constant(factor), e));
}

// Component names whose rendered series never changed.
std::vector<std::size_t> stale_components(const std::vector<DraftComponent>& comps, const std::string& feedback) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const std::string header = "\n" + comps[i].name + ": [";
    auto pos = feedback.find(header);
    if (pos == std::string::npos) continue;
    auto end = feedback.find('\n', pos + 1);
    if (feedback.substr(pos, end - pos).find("×") != std::string::npos) out.push_back(i);
  }
  return out;
}

std::string render(std::vector<DraftComponent> comps, const Vocabulary& vocab) {
  std::set<std::string> used;
  std::string text;
  for (auto& c : comps) {
    std::string name = c.name;
    for (int n = 2; used.count(name) != 0 || vocab.variables.count(name) != 0; ++n) name = fmt::format("{}_{}", c.name, n);
    used.insert(name);
    text += name + " = " + c.expr + "\n";
  }
  return text;
}

std::string corrupt(std::string text, const Vocabulary& vocab, Sampler& s) {
  if (s.unit() < 0.5) {
    for (const auto& var : vocab.variables) {
      const auto pos = text.find(" " + var);
      if (pos != std::string::npos && text.find(" = ") < pos) {
        return text.insert(pos + 1 + var.size(), "_value");
      }
    }
  }
  text.insert(text.size() - 1, " +");
  return text;
}

}  // namespace

std::vector<Proposal> MockGenerator::propose(const GeneratorContext& ctx, int k, double temperature) {
  if (k < 1) throw GeneratorError("k must be at least 1");
  const Vocabulary vocab = build_vocabulary(ctx.registry);

  std::vector<DraftComponent> prior;
  std::vector<std::size_t> stale;
  if (ctx.prior && ctx.prior->program) {
    for (const auto& c : ctx.prior->program->components()) prior.push_back({c.name, dsl::to_string(c.expr)});
    if (ctx.expose_components) stale = stale_components(prior, "\n" + ctx.prior->feedback);
  }
  const double fresh_share = std::clamp(options_.fresh_share * temperature, 0.0, 1.0);

  std::vector<Proposal> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    Rng rng = make_rng(derive_seed(ctx.sample_seed, {static_cast<std::uint64_t>(i)}));
    Sampler s(vocab, options_, rng);
    std::vector<DraftComponent> comps;

    if (prior.empty() || s.unit() < fresh_share) {
      const std::size_t n = 1 + s.index(3);
      for (std::size_t c = 0; c < n; ++c) comps.push_back(s.component());
    } else {
      comps = prior;
      const std::size_t target = !stale.empty() && s.unit() < 0.6 ? stale[s.index(stale.size())] : s.index(comps.size());
      const double op = s.unit();
      if (op < 0.3) {
        comps.push_back(s.component());
      } else if (op < 0.6) {
        static constexpr double factors[] = {0.2, 0.5, 2.0, 5.0};
        comps[target].expr = rescaled(ctx.prior->program->components()[target].expr, s.pick(factors));
      } else if (op < 0.85 || comps.size() == 1) {
        comps[target] = s.component();
      } else {
        comps.erase(comps.begin() + static_cast<std::ptrdiff_t>(target));
      }
    }

    std::string program = render(std::move(comps), vocab);
    if (s.unit() < options_.error_rate) program = corrupt(std::move(program), vocab, s);
    static constexpr const char* intros[] = {
        "Here is a reward program for this task.",
        "The reward below combines the components described above.",
        "I revised the reward based on the training statistics.",
    };
    out.push_back(make_proposal(fmt::format("{}\n\n```\n{}```\n", s.pick(intros), program), ctx.registry));
  }
  return out;
}

}  // namespace rewardevo::gen
