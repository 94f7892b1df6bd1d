#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace safemon::stl {

/// Real-valued expression over the components of one state vector.
class Expr {
 public:
  enum class Kind { Constant, Component, Negate, Abs, Add, Sub, Mul, Div, Min, Max, Dist };

  static Expr constant(double value);
  static Expr component(std::size_t index);
  static Expr negate(Expr operand);
  static Expr abs(Expr operand);
  static Expr binary(Kind kind, Expr lhs, Expr rhs);
  /// Euclidean distance between (x, y) and (px, py).
  static Expr dist(Expr x, Expr y, Expr px, Expr py);

  /// Throws EvalError when a divisor has magnitude below 1e-12.
  [[nodiscard]] double evaluate(std::span<const double> state) const;

  [[nodiscard]] Kind kind() const;
  [[nodiscard]] double value() const;
  [[nodiscard]] std::size_t index() const;
  [[nodiscard]] const std::vector<Expr>& operands() const;

  /// Largest component index referenced, or -1 when none.
  [[nodiscard]] long max_component() const;
  [[nodiscard]] std::string to_string() const;

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  struct Node;
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

/// STL formula AST. Temporal bounds are inclusive step offsets relative to the
/// evaluation time; `lower() <= upper()` always holds.
class Formula {
 public:
  enum class Kind { Atom, Not, And, Or, Always, Eventually, Until };

  /// Predicate `margin > 0`.
  static Formula atom(Expr margin);
  static Formula negation(Formula operand);
  static Formula conjunction(Formula lhs, Formula rhs);
  static Formula disjunction(Formula lhs, Formula rhs);
  static Formula always(std::size_t a, std::size_t b, Formula operand);
  static Formula eventually(std::size_t a, std::size_t b, Formula operand);
  static Formula until(std::size_t a, std::size_t b, Formula lhs, Formula rhs);

  [[nodiscard]] Kind kind() const;
  [[nodiscard]] std::size_t lower() const;
  [[nodiscard]] std::size_t upper() const;
  [[nodiscard]] const std::vector<Formula>& children() const;
  [[nodiscard]] const Expr& margin() const;

  [[nodiscard]] long max_component() const;
  [[nodiscard]] std::size_t depth() const;
  [[nodiscard]] std::string to_string() const;

  friend bool operator==(const Formula& a, const Formula& b);

 private:
  struct Node;
  explicit Formula(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

}  // namespace safemon::stl
