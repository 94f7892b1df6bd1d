#pragma once

#include <cstddef>
#include <vector>

#include "safemon/stl/formula.hpp"
#include "safemon/stl/trace.hpp"

namespace safemon::stl {

/// Maximum lookahead (in steps) needed to evaluate `formula` at one time.
std::size_t required_horizon(const Formula& formula);

/// Quantitative robustness of `formula` on `trace` at time `t`.
/// Throws HorizonError when t + required_horizon(formula) > T - 1.
double robustness(const Formula& formula, const Trace& trace, std::size_t t);

/// Robustness at every t in [first, last]; shares sub-results across times.
std::vector<double> robustness_signal(const Formula& formula, const Trace& trace,
                                      std::size_t first, std::size_t last);

/// Boolean satisfaction: robustness strictly positive.
bool satisfies(const Formula& formula, const Trace& trace, std::size_t t);

}  // namespace safemon::stl
