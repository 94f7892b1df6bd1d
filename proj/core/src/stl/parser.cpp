#include "safemon/stl/parser.hpp"

#include <cctype>
#include <charconv>
#include <string>
#include <vector>

#include "safemon/error.hpp"

namespace safemon::stl {
namespace {

enum class Tok {
  Number,
  Ident,
  LBracket,
  RBracket,
  LParen,
  RParen,
  Comma,
  Plus,
  Minus,
  Star,
  Slash,
  Gt,
  Lt,
  Ge,
  Le,
  Bang,
  Amp,
  Pipe,
  End
};

struct Token {
  Tok kind;
  std::size_t offset;
  std::string_view text;
};

std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < src.size()) {
    const unsigned char c = static_cast<unsigned char>(src[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    if (std::isdigit(c) || (c == '.' && i + 1 < src.size() &&
                            std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      while (i < src.size() && (std::isdigit(static_cast<unsigned char>(src[i])) || src[i] == '.')) ++i;
      if (i < src.size() && (src[i] == 'e' || src[i] == 'E')) {
        std::size_t j = i + 1;
        if (j < src.size() && (src[j] == '+' || src[j] == '-')) ++j;
        if (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) {
          i = j;
          while (i < src.size() && std::isdigit(static_cast<unsigned char>(src[i]))) ++i;
        }
      }
      out.push_back({Tok::Number, start, src.substr(start, i - start)});
      continue;
    }
    if (std::isalpha(c) || c == '_') {
      while (i < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[i])) || src[i] == '_')) {
        ++i;
      }
      out.push_back({Tok::Ident, start, src.substr(start, i - start)});
      continue;
    }
    Tok kind{};
    std::size_t len = 1;
    switch (c) {
      case '[': kind = Tok::LBracket; break;
      case ']': kind = Tok::RBracket; break;
      case '(': kind = Tok::LParen; break;
      case ')': kind = Tok::RParen; break;
      case ',': kind = Tok::Comma; break;
      case '+': kind = Tok::Plus; break;
      case '-': kind = Tok::Minus; break;
      case '*': kind = Tok::Star; break;
      case '/': kind = Tok::Slash; break;
      case '!': kind = Tok::Bang; break;
      case '&': kind = Tok::Amp; break;
      case '|': kind = Tok::Pipe; break;
      case '>':
        kind = Tok::Gt;
        if (i + 1 < src.size() && src[i + 1] == '=') {
          kind = Tok::Ge;
          len = 2;
        }
        break;
      case '<':
        kind = Tok::Lt;
        if (i + 1 < src.size() && src[i + 1] == '=') {
          kind = Tok::Le;
          len = 2;
        }
        break;
      default:
        throw ParseError("unexpected character '" + std::string(1, src[i]) + "'", start);
    }
    out.push_back({kind, start, src.substr(start, len)});
    i += len;
  }
  out.push_back({Tok::End, src.size(), {}});
  return out;
}

class Parser {
 public:
  Parser(std::vector<Token> tokens, std::size_t state_dim)
      : toks_(std::move(tokens)), dim_(state_dim) {}

  Formula parse() {
    Formula f = disjunction();
    if (peek().kind != Tok::End) fail("unexpected trailing input");
    return f;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  const Token& advance() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  bool accept(Tok kind) {
    if (peek().kind != kind) return false;
    ++pos_;
    return true;
  }
  const Token& expect(Tok kind, const char* what) {
    if (peek().kind != kind) fail(std::string("expected ") + what);
    return advance();
  }
  bool is_ident(std::string_view name, std::size_t ahead = 0) const {
    return peek(ahead).kind == Tok::Ident && peek(ahead).text == name;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    const auto& t = peek();
    throw ParseError(msg + (t.kind == Tok::End ? " (end of input)"
                                               : " near '" + std::string(t.text) + "'"),
                     t.offset);
  }

  Formula disjunction() {
    Formula lhs = conjunction();
    while (accept(Tok::Pipe)) lhs = Formula::disjunction(lhs, conjunction());
    return lhs;
  }

  Formula conjunction() {
    Formula lhs = until();
    while (accept(Tok::Amp)) lhs = Formula::conjunction(lhs, until());
    return lhs;
  }

  Formula until() {
    Formula lhs = unary();
    while (is_ident("U") && peek(1).kind == Tok::LBracket) {
      advance();
      const auto [a, b] = interval();
      lhs = Formula::until(a, b, lhs, unary());
    }
    return lhs;
  }

  Formula unary() {
    if (accept(Tok::Bang)) return Formula::negation(unary());
    if ((is_ident("G") || is_ident("F")) && peek(1).kind == Tok::LBracket) {
      const bool always = peek().text == "G";
      advance();
      const auto [a, b] = interval();
      Formula operand = unary();
      return always ? Formula::always(a, b, operand) : Formula::eventually(a, b, operand);
    }
    if (peek().kind == Tok::LParen && !parenthesis_starts_arithmetic()) {
      advance();
      Formula inner = disjunction();
      expect(Tok::RParen, "')'");
      return inner;
    }
    return atom();
  }

  // A '(' opens an arithmetic group when the token after its matching ')'
  // continues an arithmetic expression or comparison.
  bool parenthesis_starts_arithmetic() const {
    int depth = 0;
    for (std::size_t i = pos_; i < toks_.size(); ++i) {
      if (toks_[i].kind == Tok::LParen) ++depth;
      if (toks_[i].kind == Tok::RParen && --depth == 0) {
        switch (toks_[std::min(i + 1, toks_.size() - 1)].kind) {
          case Tok::Plus:
          case Tok::Minus:
          case Tok::Star:
          case Tok::Slash:
          case Tok::Gt:
          case Tok::Lt:
          case Tok::Ge:
          case Tok::Le:
            return true;
          default:
            return false;
        }
      }
    }
    return false;
  }

  std::pair<std::size_t, std::size_t> interval() {
    expect(Tok::LBracket, "'['");
    const std::size_t a = integer();
    expect(Tok::Comma, "','");
    const std::size_t b = integer();
    expect(Tok::RBracket, "']'");
    if (b < a) {
      throw IntervalError("interval [" + std::to_string(a) + "," + std::to_string(b) +
                          "] has upper bound below lower bound");
    }
    return {a, b};
  }

  std::size_t integer() {
    const Token& t = peek();
    if (t.kind != Tok::Number) fail("expected nonnegative integer");
    std::size_t value = 0;
    const auto* end = t.text.data() + t.text.size();
    const auto res = std::from_chars(t.text.data(), end, value);
    if (res.ec != std::errc() || res.ptr != end) fail("expected nonnegative integer");
    advance();
    return value;
  }

  Formula atom() {
    Expr lhs = expr();
    const Tok op = peek().kind;
    if (op != Tok::Gt && op != Tok::Lt && op != Tok::Ge && op != Tok::Le) {
      fail("expected comparison operator");
    }
    advance();
    Expr rhs = expr();
    const auto is_zero = [](const Expr& e) {
      return e.kind() == Expr::Kind::Constant && e.value() == 0.0;
    };
    if (op == Tok::Gt || op == Tok::Ge) {
      return Formula::atom(is_zero(rhs) ? lhs : Expr::binary(Expr::Kind::Sub, lhs, rhs));
    }
    return Formula::atom(is_zero(lhs) ? rhs : Expr::binary(Expr::Kind::Sub, rhs, lhs));
  }

  Expr expr() {
    Expr lhs = term();
    for (;;) {
      if (accept(Tok::Plus)) {
        lhs = Expr::binary(Expr::Kind::Add, lhs, term());
      } else if (accept(Tok::Minus)) {
        lhs = Expr::binary(Expr::Kind::Sub, lhs, term());
      } else {
        return lhs;
      }
    }
  }

  Expr term() {
    Expr lhs = factor();
    for (;;) {
      if (accept(Tok::Star)) {
        lhs = Expr::binary(Expr::Kind::Mul, lhs, factor());
      } else if (accept(Tok::Slash)) {
        lhs = Expr::binary(Expr::Kind::Div, lhs, factor());
      } else {
        return lhs;
      }
    }
  }

  Expr factor() {
    const Token& t = peek();
    if (accept(Tok::Minus)) {
      Expr operand = factor();
      // Fold negative literals so that printed constants parse back unchanged.
      if (operand.kind() == Expr::Kind::Constant) return Expr::constant(-operand.value());
      return Expr::negate(std::move(operand));
    }
    if (t.kind == Tok::Number) {
      double value = 0.0;
      const auto* end = t.text.data() + t.text.size();
      const auto res = std::from_chars(t.text.data(), end, value);
      if (res.ec != std::errc() || res.ptr != end) fail("malformed number");
      advance();
      return Expr::constant(value);
    }
    if (accept(Tok::LParen)) {
      Expr inner = expr();
      expect(Tok::RParen, "')'");
      return inner;
    }
    if (t.kind != Tok::Ident) fail("expected expression");
    if (t.text == "s") {
      advance();
      expect(Tok::LBracket, "'['");
      const std::size_t index_offset = peek().offset;
      const std::size_t index = integer();
      expect(Tok::RBracket, "']'");
      if (index >= dim_) {
        throw IndexError("s[" + std::to_string(index) + "] at byte " +
                         std::to_string(index_offset) + " out of range for state dimension " +
                         std::to_string(dim_));
      }
      return Expr::component(index);
    }
    if (t.text == "abs") {
      advance();
      expect(Tok::LParen, "'('");
      Expr inner = expr();
      expect(Tok::RParen, "')'");
      return Expr::abs(inner);
    }
    if (t.text == "min" || t.text == "max") {
      const auto kind = t.text == "min" ? Expr::Kind::Min : Expr::Kind::Max;
      advance();
      expect(Tok::LParen, "'('");
      Expr a = expr();
      expect(Tok::Comma, "','");
      Expr b = expr();
      expect(Tok::RParen, "')'");
      return Expr::binary(kind, a, b);
    }
    if (t.text == "dist") {
      advance();
      expect(Tok::LParen, "'('");
      auto [x, y] = pair();
      expect(Tok::Comma, "','");
      auto [px, py] = pair();
      expect(Tok::RParen, "')'");
      return Expr::dist(x, y, px, py);
    }
    fail("unknown identifier");
  }

  std::pair<Expr, Expr> pair() {
    expect(Tok::LParen, "'('");
    Expr a = expr();
    expect(Tok::Comma, "','");
    Expr b = expr();
    expect(Tok::RParen, "')'");
    return {a, b};
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::size_t dim_;
};

}  // namespace

Formula parse_formula(std::string_view text, std::size_t state_dim) {
  return Parser(tokenize(text), state_dim).parse();
}

}  // namespace safemon::stl
