#pragma once

// Exhaustive robustness evaluator used as an independent reference. It walks
// the formula top-down and enumerates every window index (and, for until,
// every split point) straight from the recursive semantics. It shares no code
// with the production evaluator beyond the AST accessors.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "safemon/stl/formula.hpp"
#include "safemon/stl/trace.hpp"

namespace safemon::oracle {

inline double oracle_robustness(const stl::Formula& f, const stl::Trace& trace, std::size_t t) {
  using K = stl::Formula::Kind;
  if (t >= trace.length()) throw std::out_of_range("oracle: time beyond trace");
  switch (f.kind()) {
    case K::Atom:
      return f.margin().evaluate(trace[t]);
    case K::Not:
      return -oracle_robustness(f.children()[0], trace, t);
    case K::And:
      return std::min(oracle_robustness(f.children()[0], trace, t),
                      oracle_robustness(f.children()[1], trace, t));
    case K::Or:
      return std::max(oracle_robustness(f.children()[0], trace, t),
                      oracle_robustness(f.children()[1], trace, t));
    case K::Always: {
      double r = std::numeric_limits<double>::infinity();
      for (std::size_t u = t + f.lower(); u <= t + f.upper(); ++u)
        r = std::min(r, oracle_robustness(f.children()[0], trace, u));
      return r;
    }
    case K::Eventually: {
      double r = -std::numeric_limits<double>::infinity();
      for (std::size_t u = t + f.lower(); u <= t + f.upper(); ++u)
        r = std::max(r, oracle_robustness(f.children()[0], trace, u));
      return r;
    }
    case K::Until: {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t u = t + f.lower(); u <= t + f.upper(); ++u) {
        double prefix = std::numeric_limits<double>::infinity();
        for (std::size_t v = t; v <= u; ++v)
          prefix = std::min(prefix, oracle_robustness(f.children()[0], trace, v));
        best = std::max(best, std::min(oracle_robustness(f.children()[1], trace, u), prefix));
      }
      return best;
    }
  }
  throw std::logic_error("oracle: unknown node");
}

inline std::size_t oracle_horizon(const stl::Formula& f) {
  using K = stl::Formula::Kind;
  switch (f.kind()) {
    case K::Atom: return 0;
    case K::Not: return oracle_horizon(f.children()[0]);
    case K::And:
    case K::Or:
      return std::max(oracle_horizon(f.children()[0]), oracle_horizon(f.children()[1]));
    case K::Always:
    case K::Eventually: return f.upper() + oracle_horizon(f.children()[0]);
    case K::Until:
      return f.upper() +
             std::max(oracle_horizon(f.children()[0]), oracle_horizon(f.children()[1]));
  }
  return 0;
}

/// Random formula over `dim` components with total nesting depth <= depth.
inline stl::Formula random_formula(std::mt19937_64& rng, std::size_t dim, int depth,
                                   std::size_t max_bound) {
  std::uniform_int_distribution<int> pick(0, depth <= 1 ? 0 : 6);
  std::uniform_int_distribution<std::size_t> comp(0, dim - 1);
  std::uniform_real_distribution<double> shift(-2.0, 2.0);
  std::uniform_int_distribution<std::size_t> bound(0, max_bound);
  auto atom = [&] {
    auto e = stl::Expr::component(comp(rng));
    if (rng() % 2 == 0) e = stl::Expr::binary(stl::Expr::Kind::Sub, e, stl::Expr::constant(shift(rng)));
    if (rng() % 4 == 0) e = stl::Expr::abs(e);
    return stl::Formula::atom(e);
  };
  auto interval = [&] {
    std::size_t a = bound(rng);
    std::size_t b = bound(rng);
    if (a > b) std::swap(a, b);
    return std::pair{a, b};
  };
  switch (pick(rng)) {
    case 0: return atom();
    case 1: return stl::Formula::negation(random_formula(rng, dim, depth - 1, max_bound));
    case 2:
      return stl::Formula::conjunction(random_formula(rng, dim, depth - 1, max_bound),
                                       random_formula(rng, dim, depth - 1, max_bound));
    case 3:
      return stl::Formula::disjunction(random_formula(rng, dim, depth - 1, max_bound),
                                       random_formula(rng, dim, depth - 1, max_bound));
    case 4: {
      auto [a, b] = interval();
      return stl::Formula::always(a, b, random_formula(rng, dim, depth - 1, max_bound));
    }
    case 5: {
      auto [a, b] = interval();
      return stl::Formula::eventually(a, b, random_formula(rng, dim, depth - 1, max_bound));
    }
    default: {
      auto [a, b] = interval();
      return stl::Formula::until(a, b, random_formula(rng, dim, depth - 1, max_bound),
                                 random_formula(rng, dim, depth - 1, max_bound));
    }
  }
}

/// Random trace whose values sit on a coarse grid so that ties (and exact
/// zeros) occur often.
inline stl::Trace random_trace(std::mt19937_64& rng, std::size_t dim, std::size_t length) {
  std::uniform_int_distribution<int> v(-8, 8);
  stl::Trace tr(dim);
  std::vector<double> s(dim);
  for (std::size_t t = 0; t < length; ++t) {
    for (auto& x : s) x = 0.5 * v(rng);
    tr.push_back(s);
  }
  return tr;
}

}  // namespace safemon::oracle
