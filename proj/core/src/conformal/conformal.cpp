#include "safemon/conformal/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "safemon/error.hpp"

namespace safemon::conformal {

NcsSet::NcsSet(std::vector<double> scores) : scores_(std::move(scores)) {
  for (double s : scores_) {
    if (!std::isfinite(s)) throw ParameterError("non-conformity scores must be finite");
  }
  std::sort(scores_.begin(), scores_.end());
}

void NcsSet::insert(double score) {
  if (!std::isfinite(score)) throw ParameterError("non-conformity scores must be finite");
  scores_.insert(std::upper_bound(scores_.begin(), scores_.end(), score), score);
}

double NcsSet::kth_smallest(std::size_t k) const {
  if (k < 1 || k > scores_.size()) {
    throw ParameterError("order statistic " + std::to_string(k) + " outside [1, " +
                         std::to_string(scores_.size()) + "]");
  }
  return scores_[k - 1];
}

long quantile_index(double x) { return static_cast<long>(std::ceil(x - 1e-9)); }

namespace {

void require_nonempty(const NcsSet& ncs) {
  if (ncs.empty()) throw EmptyInputError("non-conformity set is empty");
}

RegionThreshold order_statistic_or_inf(const NcsSet& ncs, long k) {
  if (k > static_cast<long>(ncs.size())) return RegionThreshold::plus_infinity();
  if (k < 1) return RegionThreshold::minus_infinity();
  return {ncs.kth_smallest(static_cast<std::size_t>(k))};
}

}  // namespace

RegionThreshold icp_threshold(const NcsSet& ncs, double delta) {
  require_nonempty(ncs);
  if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("delta must lie in (0,1)");
  const double n = static_cast<double>(ncs.size());
  return order_statistic_or_inf(ncs, quantile_index((n + 1.0) * (1.0 - delta)));
}

RegionThreshold rcp_threshold(const NcsSet& ncs, double delta, double epsilon) {
  require_nonempty(ncs);
  if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("delta must lie in (0,1)");
  if (!(epsilon >= 0.0 && epsilon < delta)) {
    throw ParameterError("robust conformal prediction needs 0 <= epsilon < delta");
  }
  const double n = static_cast<double>(ncs.size());
  const long k = quantile_index((n + 1.0) * (1.0 - delta + epsilon));
  if (k > static_cast<long>(ncs.size())) {
    throw CalibrationSizeError("robust quantile index " + std::to_string(k) +
                               " exceeds calibration size " + std::to_string(ncs.size()));
  }
  return order_statistic_or_inf(ncs, k);
}

double max_feasible_epsilon(std::size_t n, double delta, double step) {
  double best = -1.0;
  const double np1 = static_cast<double>(n) + 1.0;
  for (int i = 0;; ++i) {
    const double eps = i * step;
    if (eps >= delta - 1e-12) break;
    if (quantile_index(np1 * (1.0 - delta + eps)) <= static_cast<long>(n)) best = eps;
  }
  return best;
}

AcpState AcpState::initial(double delta, double gamma) {
  if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("delta must lie in (0,1)");
  if (!(gamma > 0.0)) throw ParameterError("gamma must be positive");
  AcpState s;
  s.delta_target = delta;
  s.delta_t = delta;
  s.gamma = gamma;
  return s;
}

void AcpState::update(int e_t) {
  delta_t = delta_t + gamma * (delta_target - static_cast<double>(e_t));
  error_history.push_back(e_t);
  ++step_count;
}

AcpState acp_update(AcpState state, int e_t) {
  state.update(e_t);
  return state;
}

RegionThreshold acp_threshold(const AcpState& state, const NcsSet& ncs) {
  require_nonempty(ncs);
  if (state.delta_t <= 0.0) return RegionThreshold::plus_infinity();
  if (state.delta_t >= 1.0) return RegionThreshold::minus_infinity();
  const double n = static_cast<double>(ncs.size());
  return order_statistic_or_inf(ncs, quantile_index(n * (1.0 - state.delta_t)));
}

AcpStepResult acp_step(AcpState& state, NcsSet& ncs, double score, bool append_before_threshold) {
  if (append_before_threshold) ncs.insert(score);
  AcpStepResult r;
  r.threshold = ncs.empty() ? RegionThreshold::plus_infinity() : acp_threshold(state, ncs);
  r.error = r.threshold.covers(score) ? 0 : 1;
  state.update(r.error);
  if (!append_before_threshold) ncs.insert(score);
  return r;
}

CoverageBounds coverage_bounds(std::size_t T, double delta, double gamma, double delta_1) {
  const double denom = static_cast<double>(T) * gamma;
  return {(delta + gamma) / denom, ((1.0 - delta) + gamma) / denom,
          (std::max(delta_1, 1.0 - delta_1) + gamma) / denom};
}

double empirical_coverage(std::span<const int> errors) {
  if (errors.empty()) throw EmptyInputError("empirical_coverage of an empty error sequence");
  const double total = std::accumulate(errors.begin(), errors.end(), 0.0);
  return 1.0 - total / static_cast<double>(errors.size());
}

}  // namespace safemon::conformal
