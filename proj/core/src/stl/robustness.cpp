#include "safemon/stl/robustness.hpp"

#include <algorithm>
#include <limits>

#include "safemon/error.hpp"

namespace safemon::stl {
namespace {

using Signal = std::vector<double>;

// Robustness of `f` at every time in [first, last]. Callers guarantee the
// trace covers last + required_horizon(f).
Signal evaluate(const Formula& f, const Trace& trace, std::size_t first, std::size_t last) {
  const std::size_t n = last - first + 1;
  Signal out(n);
  const auto& ch = f.children();
  switch (f.kind()) {
    case Formula::Kind::Atom:
      for (std::size_t i = 0; i < n; ++i) out[i] = f.margin().evaluate(trace[first + i]);
      break;
    case Formula::Kind::Not: {
      out = evaluate(ch[0], trace, first, last);
      for (double& v : out) v = -v;
      break;
    }
    case Formula::Kind::And:
    case Formula::Kind::Or: {
      const Signal lhs = evaluate(ch[0], trace, first, last);
      const Signal rhs = evaluate(ch[1], trace, first, last);
      const bool is_and = f.kind() == Formula::Kind::And;
      for (std::size_t i = 0; i < n; ++i) {
        out[i] = is_and ? std::min(lhs[i], rhs[i]) : std::max(lhs[i], rhs[i]);
      }
      break;
    }
    case Formula::Kind::Always:
    case Formula::Kind::Eventually: {
      const std::size_t a = f.lower();
      const std::size_t b = f.upper();
      const Signal inner = evaluate(ch[0], trace, first + a, last + b);
      const bool is_always = f.kind() == Formula::Kind::Always;
      for (std::size_t i = 0; i < n; ++i) {
        // inner[i + k] is the child at time first + a + i + k
        double acc = inner[i];
        for (std::size_t k = 1; k <= b - a; ++k) {
          acc = is_always ? std::min(acc, inner[i + k]) : std::max(acc, inner[i + k]);
        }
        out[i] = acc;
      }
      break;
    }
    case Formula::Kind::Until: {
      const std::size_t a = f.lower();
      const std::size_t b = f.upper();
      const Signal hold = evaluate(ch[0], trace, first, last + b);
      const Signal reach = evaluate(ch[1], trace, first + a, last + b);
      for (std::size_t i = 0; i < n; ++i) {
        double prefix_min = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < a; ++k) prefix_min = std::min(prefix_min, hold[i + k]);
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t k = a; k <= b; ++k) {
          prefix_min = std::min(prefix_min, hold[i + k]);
          best = std::max(best, std::min(reach[i + k - a], prefix_min));
        }
        out[i] = best;
      }
      break;
    }
  }
  return out;
}

void check_horizon(const Formula& f, const Trace& trace, std::size_t last) {
  const std::size_t need = last + required_horizon(f);
  if (trace.length() == 0 || need > trace.length() - 1) {
    throw HorizonError("formula needs trace index " + std::to_string(need) +
                       " but trace has length " + std::to_string(trace.length()));
  }
}

}  // namespace

std::size_t required_horizon(const Formula& f) {
  const auto& ch = f.children();
  switch (f.kind()) {
    case Formula::Kind::Atom: return 0;
    case Formula::Kind::Not: return required_horizon(ch[0]);
    case Formula::Kind::And:
    case Formula::Kind::Or: return std::max(required_horizon(ch[0]), required_horizon(ch[1]));
    case Formula::Kind::Always:
    case Formula::Kind::Eventually: return f.upper() + required_horizon(ch[0]);
    case Formula::Kind::Until:
      return f.upper() + std::max(required_horizon(ch[0]), required_horizon(ch[1]));
  }
  return 0;
}

double robustness(const Formula& formula, const Trace& trace, std::size_t t) {
  check_horizon(formula, trace, t);
  return evaluate(formula, trace, t, t).front();
}

std::vector<double> robustness_signal(const Formula& formula, const Trace& trace,
                                      std::size_t first, std::size_t last) {
  if (last < first) return {};
  check_horizon(formula, trace, last);
  return evaluate(formula, trace, first, last);
}

bool satisfies(const Formula& formula, const Trace& trace, std::size_t t) {
  return robustness(formula, trace, t) > 0.0;
}

}  // namespace safemon::stl
