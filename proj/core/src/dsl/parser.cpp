#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>
#include <unordered_map>

#include "rewardevo/dsl/program.hpp"
#include "typing.hpp"

namespace rewardevo::dsl {

namespace {

enum class Tok { ident, number, integer, punct, end };

struct Token {
  Tok kind;
  std::string_view text;
  int column;  // 1-based
};

struct FunctionSig {
  Op op;
  std::size_t arity;
};

const std::unordered_map<std::string_view, FunctionSig>& functions() {
  static const std::unordered_map<std::string_view, FunctionSig> table = {
      {"abs", {Op::abs, 1}},   {"exp", {Op::exp, 1}},     {"tanh", {Op::tanh, 1}},
      {"square", {Op::square, 1}}, {"sqrt", {Op::sqrt_safe, 1}}, {"min", {Op::min, 2}},
      {"max", {Op::max, 2}},   {"pow", {Op::pow, 2}},     {"norm2", {Op::norm2, 1}},
      {"dot", {Op::dot, 2}},   {"lt", {Op::lt, 2}},       {"le", {Op::le, 2}},
      {"gt", {Op::gt, 2}},     {"ge", {Op::ge, 2}},       {"clamp", {Op::clamp, 3}},
  };
  return table;
}

class LineParser {
 public:
  LineParser(std::string_view line, int line_number, const VarRegistry& registry)
      : line_(line), line_number_(line_number), registry_(registry) {
    tokenize();
  }

  Component parse_component() {
    const Token& name = peek();
    if (name.kind != Tok::ident) fail(name, "expected a component name");
    advance();
    if (!accept("=")) fail(peek(), "expected '=' after component name");
    auto [expr, shape] = parse_additive();
    if (peek().kind != Tok::end) fail(peek(), "unexpected token '" + std::string(peek().text) + "'");
    if (shape != 0) {
      fail(name, "component " + std::string(name.text) + " must evaluate to a scalar, got " +
                     detail::describe_shape(shape));
    }
    name_column_ = name.column;
    return Component{std::string(name.text), std::move(expr)};
  }

  int name_column() const { return name_column_; }

 private:
  using Typed = std::pair<Expr, int>;

  [[noreturn]] void fail(const Token& at, const std::string& message) const {
    throw ParseError(line_number_, at.column, message);
  }

  const Token& peek(std::size_t ahead = 0) const {
    return tokens_[std::min(pos_ + ahead, tokens_.size() - 1)];
  }
  void advance() {
    if (pos_ + 1 < tokens_.size()) ++pos_;
  }
  bool is(std::string_view punct) const {
    return peek().kind == Tok::punct && peek().text == punct;
  }
  bool accept(std::string_view punct) {
    if (!is(punct)) return false;
    advance();
    return true;
  }
  void expect(std::string_view punct) {
    if (!accept(punct)) fail(peek(), "expected '" + std::string(punct) + "'");
  }

  Typed typed(Expr e, std::span<const int> shapes, const Token& at) const {
    try {
      int shape = detail::infer_shape(e, shapes, registry_);
      return {std::move(e), shape};
    } catch (const detail::TypeError& err) {
      fail(at, err.what());
    }
  }

  Typed parse_additive() {
    Typed lhs = parse_multiplicative();
    while (is("+") || is("-")) {
      Token op = peek();
      advance();
      Typed rhs = parse_multiplicative();
      int shapes[] = {lhs.second, rhs.second};
      lhs = typed(Expr::binary(op.text == "+" ? Op::add : Op::sub, std::move(lhs.first),
                               std::move(rhs.first)),
                  shapes, op);
    }
    return lhs;
  }

  Typed parse_multiplicative() {
    Typed lhs = parse_unary();
    while (is("*") || is("/")) {
      Token op = peek();
      advance();
      Typed rhs = parse_unary();
      int shapes[] = {lhs.second, rhs.second};
      lhs = typed(Expr::binary(op.text == "*" ? Op::mul : Op::div_safe, std::move(lhs.first),
                               std::move(rhs.first)),
                  shapes, op);
    }
    return lhs;
  }

  Typed parse_unary() {
    if (is("-")) {
      Token op = peek();
      advance();
      // A minus directly applied to a literal is part of the literal.
      if (peek().kind == Tok::number || peek().kind == Tok::integer) {
        return parse_postfix(Typed{Expr::constant(-number(peek())), 0}, true);
      }
      Typed operand = parse_unary();
      int shapes[] = {operand.second};
      return typed(Expr::unary(Op::neg, std::move(operand.first)), shapes, op);
    }
    return parse_postfix(parse_primary(), false);
  }

  Typed parse_postfix(Typed base, bool consume_literal) {
    if (consume_literal) advance();
    while (is("[")) {
      Token open = peek();
      advance();
      if (peek().kind != Tok::integer) fail(peek(), "index must be a non-negative integer literal");
      int position = integer(peek());
      advance();
      expect("]");
      int shapes[] = {base.second};
      base = typed(Expr::index(std::move(base.first), position), shapes, open);
    }
    return base;
  }

  Typed parse_primary() {
    const Token tok = peek();
    switch (tok.kind) {
      case Tok::number:
      case Tok::integer: {
        double v = number(tok);
        advance();
        return {Expr::constant(v), 0};
      }
      case Tok::ident: {
        advance();
        if (is("(")) return parse_call(tok);
        return typed(Expr::variable(std::string(tok.text)), {}, tok);
      }
      case Tok::punct:
        if (tok.text == "(") {
          advance();
          Typed inner = parse_additive();
          expect(")");
          return inner;
        }
        fail(tok, "unexpected token '" + std::string(tok.text) + "'");
      case Tok::end:
        break;
    }
    fail(tok, "expected an expression");
  }

  Typed parse_call(const Token& name) {
    auto it = functions().find(name.text);
    if (it == functions().end()) fail(name, "unknown function " + std::string(name.text));
    const FunctionSig sig = it->second;
    expect("(");

    if (sig.op == Op::pow) {
      Typed base = parse_additive();
      expect(",");
      const Token& exponent = peek();
      if (exponent.kind != Tok::integer) {
        fail(exponent, "pow exponent must be an integer literal in [0, " +
                           std::to_string(kMaxPowExponent) + "]");
      }
      int n = integer(exponent);
      advance();
      expect(")");
      int shapes[] = {base.second};
      return typed(Expr::pow(std::move(base.first), n), shapes, name);
    }

    std::vector<Expr> args;
    std::vector<int> shapes;
    if (!is(")")) {
      do {
        Typed arg = parse_additive();
        args.push_back(std::move(arg.first));
        shapes.push_back(arg.second);
      } while (accept(","));
    }
    expect(")");
    if (args.size() != sig.arity) {
      fail(name, "function " + std::string(name.text) + " expects " + std::to_string(sig.arity) +
                     " argument(s), got " + std::to_string(args.size()));
    }
    Expr e{sig.op, 0.0, {}, 0, std::move(args)};
    return typed(std::move(e), shapes, name);
  }

  double number(const Token& tok) const {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.text.data(), tok.text.data() + tok.text.size(), v);
    if (ec != std::errc{} || ptr != tok.text.data() + tok.text.size() || !std::isfinite(v)) {
      fail(tok, "numeric literal out of range: " + std::string(tok.text));
    }
    return v;
  }

  int integer(const Token& tok) const {
    int v = 0;
    auto [ptr, ec] = std::from_chars(tok.text.data(), tok.text.data() + tok.text.size(), v);
    if (ec != std::errc{} || ptr != tok.text.data() + tok.text.size()) {
      fail(tok, "integer literal out of range: " + std::string(tok.text));
    }
    return v;
  }

  void tokenize() {
    std::size_t i = 0;
    const std::size_t n = line_.size();
    auto col = [](std::size_t i) { return static_cast<int>(i) + 1; };
    while (i < n) {
      const char c = line_[i];
      if (c == ' ' || c == '\t' || c == '\r') {
        ++i;
      } else if (std::isalpha(static_cast<unsigned char>(c))) {
        std::size_t j = i;
        while (j < n && (std::isalnum(static_cast<unsigned char>(line_[j])) || line_[j] == '_')) ++j;
        tokens_.push_back({Tok::ident, line_.substr(i, j - i), col(i)});
        i = j;
      } else if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && i + 1 < n &&
                                                                std::isdigit(static_cast<unsigned char>(line_[i + 1])))) {
        std::size_t j = i;
        bool integral = true;
        while (j < n && std::isdigit(static_cast<unsigned char>(line_[j]))) ++j;
        if (j < n && line_[j] == '.') {
          integral = false;
          ++j;
          while (j < n && std::isdigit(static_cast<unsigned char>(line_[j]))) ++j;
        }
        if (j < n && (line_[j] == 'e' || line_[j] == 'E')) {
          std::size_t k = j + 1;
          if (k < n && (line_[k] == '+' || line_[k] == '-')) ++k;
          if (k < n && std::isdigit(static_cast<unsigned char>(line_[k]))) {
            integral = false;
            j = k;
            while (j < n && std::isdigit(static_cast<unsigned char>(line_[j]))) ++j;
          }
        }
        tokens_.push_back({integral ? Tok::integer : Tok::number, line_.substr(i, j - i), col(i)});
        i = j;
      } else if (std::string_view("+-*/()[],=").find(c) != std::string_view::npos) {
        tokens_.push_back({Tok::punct, line_.substr(i, 1), col(i)});
        ++i;
      } else {
        throw ParseError(line_number_, col(i), std::string("unexpected character '") + c + "'");
      }
    }
    tokens_.push_back({Tok::end, {}, col(n)});
  }

  std::string_view line_;
  int line_number_;
  const VarRegistry& registry_;
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  int name_column_ = 1;
};

}  // namespace

RewardProgram parse_program(std::string_view source, const VarRegistry& registry) {
  std::vector<Component> components;
  std::vector<std::pair<int, int>> positions;
  int line_number = 0;
  std::size_t start = 0;
  while (start <= source.size()) {
    std::size_t end = source.find('\n', start);
    if (end == std::string_view::npos) end = source.size();
    std::string_view line = source.substr(start, end - start);
    ++line_number;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
      LineParser parser(line, line_number, registry);
      components.push_back(parser.parse_component());
      positions.emplace_back(line_number, parser.name_column());
    }
    start = end + 1;
  }
  if (components.empty()) throw ParseError(std::max(line_number, 1), 1, "program has no components");

  try {
    return RewardProgram(std::move(components), registry);
  } catch (const ParseError& err) {
    // Re-anchor component-level errors at the offending source line.
    const auto& [line, column] = positions.at(static_cast<std::size_t>(err.line() - 1));
    throw ParseError(line, column, err.message());
  }
}

}  // namespace rewardevo::dsl
