#pragma once

// Reference thresholds computed by copying and fully sorting the scores and
// indexing with exact rational arithmetic where the inputs allow it.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace safemon::oracle {

/// k-th smallest (1-based) after a full sort; +inf above n, -inf below 1.
inline double sorted_pick(std::vector<double> xs, long k) {
  std::sort(xs.begin(), xs.end());
  if (k > static_cast<long>(xs.size())) return std::numeric_limits<double>::infinity();
  if (k < 1) return -std::numeric_limits<double>::infinity();
  return xs[static_cast<std::size_t>(k - 1)];
}

/// ceil(num / den) for nonnegative integers.
inline long ceil_div(long num, long den) { return (num + den - 1) / den; }

/// Levels are passed as integer per-mille values so that the index is exact.
inline double icp_oracle(const std::vector<double>& xs, long delta_permille) {
  const long n = static_cast<long>(xs.size());
  return sorted_pick(xs, ceil_div((n + 1) * (1000 - delta_permille), 1000));
}

inline double rcp_oracle(const std::vector<double>& xs, long delta_permille, long eps_permille) {
  const long n = static_cast<long>(xs.size());
  return sorted_pick(xs, ceil_div((n + 1) * (1000 - delta_permille + eps_permille), 1000));
}

/// delta_t given in per-mille, possibly outside [0, 1000].
inline double acp_oracle(const std::vector<double>& xs, long delta_t_permille) {
  if (delta_t_permille <= 0) return std::numeric_limits<double>::infinity();
  if (delta_t_permille >= 1000) return -std::numeric_limits<double>::infinity();
  const long n = static_cast<long>(xs.size());
  return sorted_pick(xs, ceil_div(n * (1000 - delta_t_permille), 1000));
}

}  // namespace safemon::oracle
