#include "safemon/stl/formula.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "safemon/error.hpp"

namespace safemon::stl {

struct Expr::Node {
  Kind kind;
  double value = 0.0;
  std::size_t index = 0;
  std::vector<Expr> operands;
};

Expr Expr::constant(double value) {
  return Expr(std::make_shared<const Node>(Node{Kind::Constant, value, 0, {}}));
}

Expr Expr::component(std::size_t index) {
  return Expr(std::make_shared<const Node>(Node{Kind::Component, 0.0, index, {}}));
}

Expr Expr::negate(Expr operand) {
  return Expr(std::make_shared<const Node>(Node{Kind::Negate, 0.0, 0, {std::move(operand)}}));
}

Expr Expr::abs(Expr operand) {
  return Expr(std::make_shared<const Node>(Node{Kind::Abs, 0.0, 0, {std::move(operand)}}));
}

Expr Expr::binary(Kind kind, Expr lhs, Expr rhs) {
  switch (kind) {
    case Kind::Add:
    case Kind::Sub:
    case Kind::Mul:
    case Kind::Div:
    case Kind::Min:
    case Kind::Max:
      break;
    default:
      throw ParameterError("Expr::binary called with a non-binary kind");
  }
  return Expr(
      std::make_shared<const Node>(Node{kind, 0.0, 0, {std::move(lhs), std::move(rhs)}}));
}

Expr Expr::dist(Expr x, Expr y, Expr px, Expr py) {
  return Expr(std::make_shared<const Node>(
      Node{Kind::Dist, 0.0, 0, {std::move(x), std::move(y), std::move(px), std::move(py)}}));
}

double Expr::evaluate(std::span<const double> state) const {
  const auto& ops = node_->operands;
  switch (node_->kind) {
    case Kind::Constant: return node_->value;
    case Kind::Component:
      if (node_->index >= state.size()) {
        throw IndexError("s[" + std::to_string(node_->index) + "] out of range for dimension " +
                         std::to_string(state.size()));
      }
      return state[node_->index];
    case Kind::Negate: return -ops[0].evaluate(state);
    case Kind::Abs: return std::fabs(ops[0].evaluate(state));
    case Kind::Add: return ops[0].evaluate(state) + ops[1].evaluate(state);
    case Kind::Sub: return ops[0].evaluate(state) - ops[1].evaluate(state);
    case Kind::Mul: return ops[0].evaluate(state) * ops[1].evaluate(state);
    case Kind::Div: {
      const double num = ops[0].evaluate(state);
      const double den = ops[1].evaluate(state);
      if (std::fabs(den) < 1e-12) throw EvalError("division by near-zero value in predicate");
      return num / den;
    }
    case Kind::Min: return std::min(ops[0].evaluate(state), ops[1].evaluate(state));
    case Kind::Max: return std::max(ops[0].evaluate(state), ops[1].evaluate(state));
    case Kind::Dist: {
      const double dx = ops[0].evaluate(state) - ops[2].evaluate(state);
      const double dy = ops[1].evaluate(state) - ops[3].evaluate(state);
      return std::sqrt(dx * dx + dy * dy);
    }
  }
  return 0.0;
}

Expr::Kind Expr::kind() const { return node_->kind; }
double Expr::value() const { return node_->value; }
std::size_t Expr::index() const { return node_->index; }
const std::vector<Expr>& Expr::operands() const { return node_->operands; }

long Expr::max_component() const {
  long best = node_->kind == Kind::Component ? static_cast<long>(node_->index) : -1;
  for (const auto& op : node_->operands) best = std::max(best, op.max_component());
  return best;
}

namespace {

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string Expr::to_string() const {
  const auto& ops = node_->operands;
  switch (node_->kind) {
    case Kind::Constant: return format_number(node_->value);
    case Kind::Component: return "s[" + std::to_string(node_->index) + "]";
    case Kind::Negate: return "-(" + ops[0].to_string() + ")";
    case Kind::Abs: return "abs(" + ops[0].to_string() + ")";
    case Kind::Add: return "(" + ops[0].to_string() + " + " + ops[1].to_string() + ")";
    case Kind::Sub: return "(" + ops[0].to_string() + " - " + ops[1].to_string() + ")";
    case Kind::Mul: return "(" + ops[0].to_string() + " * " + ops[1].to_string() + ")";
    case Kind::Div: return "(" + ops[0].to_string() + " / " + ops[1].to_string() + ")";
    case Kind::Min: return "min(" + ops[0].to_string() + ", " + ops[1].to_string() + ")";
    case Kind::Max: return "max(" + ops[0].to_string() + ", " + ops[1].to_string() + ")";
    case Kind::Dist:
      return "dist((" + ops[0].to_string() + ", " + ops[1].to_string() + "), (" +
             ops[2].to_string() + ", " + ops[3].to_string() + "))";
  }
  return {};
}

bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  if (a.node_->kind != b.node_->kind) return false;
  if (a.node_->kind == Expr::Kind::Constant) return a.node_->value == b.node_->value;
  if (a.node_->kind == Expr::Kind::Component) return a.node_->index == b.node_->index;
  return a.node_->operands == b.node_->operands;
}

struct Formula::Node {
  Kind kind;
  std::size_t a = 0;
  std::size_t b = 0;
  std::vector<Formula> children;
  Expr margin = Expr::constant(0.0);
};

namespace {

void check_interval(std::size_t a, std::size_t b) {
  if (b < a) {
    throw IntervalError("interval [" + std::to_string(a) + "," + std::to_string(b) +
                        "] has upper bound below lower bound");
  }
}

}  // namespace

Formula Formula::atom(Expr margin) {
  return Formula(std::make_shared<const Node>(Node{Kind::Atom, 0, 0, {}, std::move(margin)}));
}

Formula Formula::negation(Formula operand) {
  return Formula(std::make_shared<const Node>(Node{Kind::Not, 0, 0, {std::move(operand)}}));
}

Formula Formula::conjunction(Formula lhs, Formula rhs) {
  return Formula(
      std::make_shared<const Node>(Node{Kind::And, 0, 0, {std::move(lhs), std::move(rhs)}}));
}

Formula Formula::disjunction(Formula lhs, Formula rhs) {
  return Formula(
      std::make_shared<const Node>(Node{Kind::Or, 0, 0, {std::move(lhs), std::move(rhs)}}));
}

Formula Formula::always(std::size_t a, std::size_t b, Formula operand) {
  check_interval(a, b);
  return Formula(std::make_shared<const Node>(Node{Kind::Always, a, b, {std::move(operand)}}));
}

Formula Formula::eventually(std::size_t a, std::size_t b, Formula operand) {
  check_interval(a, b);
  return Formula(
      std::make_shared<const Node>(Node{Kind::Eventually, a, b, {std::move(operand)}}));
}

Formula Formula::until(std::size_t a, std::size_t b, Formula lhs, Formula rhs) {
  check_interval(a, b);
  return Formula(
      std::make_shared<const Node>(Node{Kind::Until, a, b, {std::move(lhs), std::move(rhs)}}));
}

Formula::Kind Formula::kind() const { return node_->kind; }
std::size_t Formula::lower() const { return node_->a; }
std::size_t Formula::upper() const { return node_->b; }
const std::vector<Formula>& Formula::children() const { return node_->children; }
const Expr& Formula::margin() const { return node_->margin; }

long Formula::max_component() const {
  long best = node_->kind == Kind::Atom ? node_->margin.max_component() : -1;
  for (const auto& c : node_->children) best = std::max(best, c.max_component());
  return best;
}

std::size_t Formula::depth() const {
  std::size_t d = 0;
  for (const auto& c : node_->children) d = std::max(d, c.depth());
  return d + 1;
}

std::string Formula::to_string() const {
  const auto interval = [&] {
    return "[" + std::to_string(node_->a) + "," + std::to_string(node_->b) + "]";
  };
  const auto& ch = node_->children;
  switch (node_->kind) {
    case Kind::Atom: return "(" + node_->margin.to_string() + " > 0)";
    case Kind::Not: return "!" + ch[0].to_string();
    case Kind::And: return "(" + ch[0].to_string() + " & " + ch[1].to_string() + ")";
    case Kind::Or: return "(" + ch[0].to_string() + " | " + ch[1].to_string() + ")";
    case Kind::Always: return "G" + interval() + " " + ch[0].to_string();
    case Kind::Eventually: return "F" + interval() + " " + ch[0].to_string();
    case Kind::Until:
      return "(" + ch[0].to_string() + " U" + interval() + " " + ch[1].to_string() + ")";
  }
  return {};
}

bool operator==(const Formula& a, const Formula& b) {
  if (a.node_ == b.node_) return true;
  const auto& x = *a.node_;
  const auto& y = *b.node_;
  if (x.kind != y.kind || x.a != y.a || x.b != y.b) return false;
  if (x.kind == Formula::Kind::Atom) return x.margin == y.margin;
  return x.children == y.children;
}

}  // namespace safemon::stl
