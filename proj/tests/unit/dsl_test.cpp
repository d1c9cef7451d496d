#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "rewardevo/dsl/program.hpp"
#include "support/program_fuzz.hpp"

using namespace rewardevo;
using namespace rewardevo::dsl;

namespace {

VarRegistry reach_registry() {
  return VarRegistry({
      {"pos", VarKind::vector, 2, "point position", "m"},
      {"target", VarKind::vector, 2, "goal position", "m"},
      {"d", VarKind::scalar, 1, "distance to goal", "m"},
      {"x", VarKind::scalar, 1, "free scalar", ""},
  });
}

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST(VarRegistry, RejectsInvalidEntries) {
  EXPECT_THROW(VarRegistry({{"a", VarKind::scalar, 1, "", ""}}), std::invalid_argument);
  EXPECT_THROW(VarRegistry({{"a", VarKind::scalar, 1, "x", ""}, {"a", VarKind::scalar, 1, "y", ""}}),
               std::invalid_argument);
  EXPECT_THROW(VarRegistry({{"v", VarKind::vector, 0, "x", ""}}), std::invalid_argument);
  EXPECT_THROW(VarRegistry({{"1a", VarKind::scalar, 1, "x", ""}}), std::invalid_argument);
}

TEST(VarRegistry, FlatLayoutFollowsRegistrationOrder) {
  auto reg = reach_registry();
  EXPECT_EQ(reg.flat_size(), 6);
  EXPECT_EQ(reg.find("target")->offset, 2);
  EXPECT_EQ(reg.find("d")->offset, 4);
  EXPECT_EQ(reg.find("nope"), nullptr);
}

TEST(ParseProgram, SingleVectorComponent) {
  auto p = parse_program("dist_r = -norm2(pos - target)", reach_registry());
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p.components()[0].name, "dist_r");
  EXPECT_EQ(p.components()[0].expr.op, Op::neg);
}

TEST(ParseProgram, UnknownVariable) {
  try {
    parse_program("r = badvar + 1", reach_registry());
    FAIL() << "expected ParseError";
  } catch (const ParseError& err) {
    EXPECT_EQ(err.message(), "unknown variable badvar");
    EXPECT_EQ(err.line(), 1);
    EXPECT_EQ(err.column(), 5);
  }
}

TEST(ParseProgram, ReportsLineAndColumn) {
  try {
    parse_program("# header\na = d\n\nb = norm2(d)\n", reach_registry());
    FAIL() << "expected ParseError";
  } catch (const ParseError& err) {
    EXPECT_EQ(err.line(), 4);
    EXPECT_EQ(err.column(), 5);
    EXPECT_EQ(err.message(), "norm2 expects a vector argument, got scalar");
  }
}

TEST(ParseProgram, ErrorCases) {
  const auto reg = reach_registry();
  const char* bad[] = {
      "",                       // empty
      "# only a comment",       // no components
      "r = ",                   // missing expression
      "r d",                    // missing '='
      "r = d +",                // dangling operator
      "r = (d",                 // unbalanced
      "r = foo(d)",             // unknown function
      "r = abs(d, d)",          // arity
      "r = pos",                // vector root
      "r = pos + w",            // unknown var
      "r = dot(pos, d)",        // scalar in dot
      "r = pos[2]",             // index range
      "r = d[0]",               // index scalar
      "r = pow(d, 7)",          // exponent range
      "r = pow(d, 1.5)",        // non-integer exponent
      "r = lt(pos, d)",         // comparison on vector
      "r = d\nr = x",           // duplicate component
      "d = x",                  // shadows variable
      "r = d @ x",              // bad character
      "2r = d",                 // bad name
      "r = 1e999",              // literal out of range
  };
  for (const char* src : bad) {
    EXPECT_THROW(parse_program(src, reg), ParseError) << "source: " << src;
  }
}

TEST(ParseProgram, CommentsAndBlankLinesIgnored) {
  auto p = parse_program("# reward\n\n a = -d   # shaping\n\tb = 0.5 * x\n", reach_registry());
  EXPECT_EQ(p.component_names(), (std::vector<std::string>{"a", "b"}));
}

TEST(ParseProgram, MinusBindsLiteral) {
  auto p = parse_program("r = -2 * x", reach_registry());
  const Expr& e = p.components()[0].expr;
  ASSERT_EQ(e.op, Op::mul);
  EXPECT_EQ(e.args[0].op, Op::constant);
  EXPECT_EQ(e.args[0].value, -2.0);
}

TEST(EvaluateProgram, Examples) {
  auto reg = reach_registry();
  Binding b{{"pos", {3, 4}}, {"target", {0, 0}}, {"d", {0.0}}, {"x", {2.7}}};

  EXPECT_DOUBLE_EQ(evaluate_program(parse_program("r = exp(-5 * d)", reg), b).total, 1.0);
  EXPECT_DOUBLE_EQ(evaluate_program(parse_program("r = norm2(pos)", reg), b).total, 5.0);

  auto out = evaluate_program(parse_program("a = x\nb = -x", reg), b);
  EXPECT_EQ(out.total, 0.0);
  EXPECT_EQ(out.at("a"), 2.7);
  EXPECT_EQ(out.at("b"), -2.7);
}

TEST(EvaluateProgram, Guards) {
  auto reg = reach_registry();
  Binding b{{"pos", {0, 0}}, {"target", {0, 0}}, {"d", {0.0}}, {"x", {-4.0}}};
  EXPECT_EQ(evaluate_program(parse_program("r = 1 / d", reg), b).total, 1e8);
  EXPECT_EQ(evaluate_program(parse_program("r = 1 / x", reg), b).total, -0.25);
  EXPECT_EQ(evaluate_program(parse_program("r = sqrt(x)", reg), b).total, 0.0);
  EXPECT_EQ(evaluate_program(parse_program("r = exp(1000)", reg), b).total, kSaturation);
  EXPECT_EQ(evaluate_program(parse_program("r = pow(x, 0)", reg), b).total, 1.0);
  EXPECT_EQ(evaluate_program(parse_program("r = clamp(x, -1, 1) + lt(x, 0)", reg), b).total, 0.0);
}

TEST(EvaluateProgram, BindingErrors) {
  auto reg = reach_registry();
  auto p = parse_program("r = d + pos[0]", reg);
  EXPECT_THROW(evaluate_program(p, Binding{{"d", {1.0}}}), EvaluationError);
  EXPECT_THROW(evaluate_program(p, Binding{{"d", {NAN}}, {"pos", {0, 0}}}), EvaluationError);
  EXPECT_THROW(evaluate_program(p, Binding{{"d", {1.0}}, {"pos", {0, 0, 0}}}), EvaluationError);
  // Variables the program does not use need not be bound.
  EXPECT_EQ(evaluate_program(p, Binding{{"d", {1.0}}, {"pos", {2, 0}}}).total, 3.0);
}

TEST(SerializeProgram, SingleLineAndOrder) {
  auto reg = reach_registry();
  auto one = parse_program("r   =   -norm2( pos-target )", reg);
  EXPECT_EQ(serialize_program(one), "r = -norm2(pos - target)\n");

  auto three = parse_program("zeta = d\nalpha = x\nmid = d * x", reg);
  EXPECT_EQ(serialize_program(three), "zeta = d\nalpha = x\nmid = d * x\n");
}

TEST(SerializeProgram, ParenthesesOnlyWhereNeeded) {
  auto reg = reach_registry();
  const std::pair<const char*, const char*> cases[] = {
      {"r = (d - x) - (d - x)", "r = d - x - (d - x)\n"},
      {"r = d * (x + 1)", "r = d * (x + 1)\n"},
      {"r = -(2)", "r = -(2)\n"},
      {"r = --2", "r = --2\n"},
      {"r = -(d * x)", "r = -(d * x)\n"},
      {"r = d - -1", "r = d - -1\n"},
      {"r = (pos - target)[1]", "r = (pos - target)[1]\n"},
      {"r = pow(d + 1, 3) / 2e-08", "r = pow(d + 1, 3) / 2e-08\n"},
  };
  for (const auto& [src, want] : cases) {
    auto p = parse_program(src, reg);
    EXPECT_EQ(serialize_program(p), want);
    EXPECT_EQ(parse_program(serialize_program(p), reg), p) << src;
  }
}

// Random-program properties. The fuzzer builds ASTs directly, so parsing is
// checked against structures it did not produce.

TEST(DslProperties, RoundTripStructure) {
  auto reg = test_support::fuzz_registry();
  test_support::ProgramFuzzer fuzz(1234);
  for (int i = 0; i < 1000; ++i) {
    auto p = fuzz.program(reg);
    auto text = serialize_program(p);
    auto back = parse_program(text, reg);
    ASSERT_EQ(back, p) << text;
  }
}

TEST(DslProperties, SerializationIsIdempotent) {
  auto reg = test_support::fuzz_registry();
  test_support::ProgramFuzzer fuzz(99);
  for (int i = 0; i < 500; ++i) {
    auto once = serialize_program(fuzz.program(reg));
    auto twice = serialize_program(parse_program(once, reg));
    ASSERT_EQ(once, twice);
  }
}

TEST(DslProperties, CompiledMatchesReferenceSemantics) {
  auto reg = test_support::fuzz_registry();
  test_support::ProgramFuzzer fuzz(7);
  for (int i = 0; i < 2000; ++i) {
    auto p = fuzz.program(reg);
    auto binding = fuzz.binding(reg);
    auto out = evaluate_program(p, binding);
    test_support::ReferenceEvaluator ref(binding);
    for (std::size_t c = 0; c < p.size(); ++c) {
      const double want = ref.eval(p.components()[c].expr)[0];
      const double got = out.components[c].second;
      ASSERT_NEAR(got, want, 1e-9 * std::max(1.0, std::fabs(want))) << serialize_program(p);
    }
  }
}

TEST(DslProperties, PuritySummationTotality) {
  auto reg = test_support::fuzz_registry();
  test_support::ProgramFuzzer fuzz(42);
  for (int i = 0; i < 2000; ++i) {
    auto p = fuzz.program(reg);
    auto binding = fuzz.binding(reg);
    auto a = evaluate_program(p, binding);
    auto b = evaluate_program(p, binding);
    ASSERT_TRUE(bit_equal(a.total, b.total));
    double sum = 0.0;
    for (std::size_t c = 0; c < a.components.size(); ++c) {
      ASSERT_TRUE(bit_equal(a.components[c].second, b.components[c].second));
      ASSERT_TRUE(std::isfinite(a.components[c].second));
      sum += a.components[c].second;
    }
    ASSERT_TRUE(std::isfinite(a.total));
    ASSERT_LE(std::fabs(a.total - sum), 1e-9);
  }
}
