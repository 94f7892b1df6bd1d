#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace safemon::conformal {

/// Multiset of non-conformity scores kept in ascending order.
class NcsSet {
 public:
  NcsSet() = default;
  explicit NcsSet(std::vector<double> scores);

  /// Inserts one score; throws ParameterError on non-finite input.
  void insert(double score);

  [[nodiscard]] std::size_t size() const noexcept { return scores_.size(); }
  [[nodiscard]] bool empty() const noexcept { return scores_.empty(); }
  /// 1-based order statistic.
  [[nodiscard]] double kth_smallest(std::size_t k) const;
  [[nodiscard]] const std::vector<double>& sorted() const noexcept { return scores_; }

 private:
  std::vector<double> scores_;
};

/// Prediction-region threshold C; may be +inf (cover everything) or -inf.
struct RegionThreshold {
  double value = 0.0;

  static RegionThreshold plus_infinity() { return {std::numeric_limits<double>::infinity()}; }
  static RegionThreshold minus_infinity() { return {-std::numeric_limits<double>::infinity()}; }

  /// True when `score` lies inside the one-sided region, i.e. score <= C.
  [[nodiscard]] bool covers(double score) const { return score <= value; }

  friend bool operator==(const RegionThreshold&, const RegionThreshold&) = default;
};

/// ceil(x) with a 1e-9 tolerance so that products such as 20 * 0.95 land on
/// the integer they represent.
long quantile_index(double x);

/// ceil((n+1)(1-delta))-th smallest score, +inf when that index exceeds n.
RegionThreshold icp_threshold(const NcsSet& ncs, double delta);

/// ceil((n+1)(1-delta+epsilon))-th smallest score. Throws ParameterError unless
/// 0 <= epsilon < delta < 1 and CalibrationSizeError when the index exceeds n.
RegionThreshold rcp_threshold(const NcsSet& ncs, double delta, double epsilon);

/// Largest epsilon on the grid {0, step, 2 step, ...} below delta whose robust
/// index still fits inside a calibration set of size n; -1 when none fits.
double max_feasible_epsilon(std::size_t n, double delta, double step = 0.01);

struct AcpState {
  double delta_target = 0.1;
  double delta_t = 0.1;
  double gamma = 0.005;
  std::size_t step_count = 0;
  std::vector<int> error_history;

  static AcpState initial(double delta, double gamma);

  /// delta_t += gamma * (delta_target - e); no clamping.
  void update(int e_t);
};

AcpState acp_update(AcpState state, int e_t);

/// ceil(n(1-delta_t))-th smallest score; +inf when delta_t <= 0, -inf when
/// delta_t >= 1.
RegionThreshold acp_threshold(const AcpState& state, const NcsSet& ncs);

struct AcpStepResult {
  RegionThreshold threshold;
  int error = 0;
};

/// One coupled ACP step: optionally append `score` to the set, form the
/// threshold, record the miscoverage indicator [score > C] and update delta_t.
AcpStepResult acp_step(AcpState& state, NcsSet& ncs, double score, bool append_before_threshold = true);

struct CoverageBounds {
  double p1 = 0.0;
  double p2 = 0.0;
  double prop1_bound = 0.0;
};

/// Finite-horizon ACP constants: p1 = (delta+gamma)/(T gamma),
/// p2 = ((1-delta)+gamma)/(T gamma), and the deterministic long-run bound
/// (max{delta_1, 1-delta_1}+gamma)/(T gamma).
CoverageBounds coverage_bounds(std::size_t T, double delta, double gamma, double delta_1);

/// 1 - mean(errors). Throws EmptyInputError on empty input.
double empirical_coverage(std::span<const int> errors);

}  // namespace safemon::conformal
