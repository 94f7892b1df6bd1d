#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "safemon/monitor/monitor.hpp"

namespace safemon::metrics {

struct EpisodeOutcome {
  long episode_id = -1;
  std::optional<std::size_t> violation_time;
  std::vector<std::size_t> alarm_times;  // ascending
  std::vector<monitor::StepRecord> records;

  [[nodiscard]] bool violating() const { return violation_time.has_value(); }
  static EpisodeOutcome from_records(long id, std::optional<std::size_t> violation_time,
                                     std::vector<monitor::StepRecord> records);
};

enum class Outcome { TP, FP, FN, TN };

struct Classification {
  Outcome outcome = Outcome::TN;
  /// Steps between the earliest counted alarm and the violation, capped at H.
  std::optional<std::size_t> timeliness;
};

/// Windowed rule (default): a violating episode is a TP only when some alarm
/// falls in [v - H, v). With `any_time` every alarm before v counts.
/// Non-violating episodes with any alarm are FP.
Classification classify_episode(const EpisodeOutcome& outcome, std::size_t H, bool any_time = false);

struct MetricsSummary {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  /// Absent when the denominator is zero.
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> timeliness;
  /// 1 - mean e_t over every step that recorded one.
  std::optional<double> empirical_coverage;
  /// Share of steps with a threshold whose |R_t| exceeds tau.
  std::optional<double> p_exceed_tau;
  std::optional<double> ade;
  std::optional<double> tv_estimate;
  std::vector<std::size_t> timeliness_values;
};

MetricsSummary aggregate(const std::vector<EpisodeOutcome>& outcomes, std::size_t H, double tau,
                         bool any_time = false);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population deviation; 0 for a single trial
  std::size_t trials = 0;
};

/// Mean and deviation over trials of each defined metric; metrics undefined in
/// every trial stay absent.
struct TrialSummary {
  std::optional<MeanStd> precision, recall, timeliness, empirical_coverage, p_exceed_tau, ade,
      tv_estimate;
  std::vector<MetricsSummary> trials;
};

TrialSummary summarize_trials(std::vector<MetricsSummary> trials);

struct EnvelopePoint {
  std::size_t T = 0;
  double empirical = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  /// Episodes contributing at this prefix (1 for a single run).
  std::size_t episodes = 1;
};

/// Empirical coverage after each of the first T errors against
/// [1 - delta - p1(T), 1 - delta + p2(T)].
std::vector<EnvelopePoint> coverage_envelope_series(const std::vector<int>& errors, double delta,
                                                    double gamma, double delta_1);
std::vector<EnvelopePoint> coverage_envelope_series(const std::vector<monitor::StepRecord>& records,
                                                    double delta, double gamma, double delta_1);

/// Per prefix T, the mean empirical coverage over the episodes that recorded
/// at least T errors. The bounds depend only on T, so the mean of in-bound
/// series stays in bound.
std::vector<EnvelopePoint> pooled_envelope_series(const std::vector<std::vector<int>>& errors,
                                                  double delta, double gamma, double delta_1);

/// Satisfaction frequency of the true forecast windows over steps where no
/// alarm has been raised yet in the episode.
struct SatisfactionCheck {
  std::size_t steps = 0;
  std::size_t satisfied = 0;
  double frequency = 0.0;
  double bound = 0.0;  // 1 - delta - p1(steps)
  [[nodiscard]] bool holds() const { return steps > 0 && frequency >= bound; }
};

/// Pools, over episodes, the steps t > t0 before the first alarm whose window
/// [t+1, t+H] was fully observed (rho_lagged recorded at t + H).
SatisfactionCheck alarm_free_satisfaction(const std::vector<std::vector<monitor::StepRecord>>& runs,
                                          std::size_t t0, std::size_t H, double delta, double gamma);

std::string summary_json(const MetricsSummary& summary);
std::string trial_summary_json(const TrialSummary& summary);
/// Columns T,empirical,lower,upper.
std::string envelope_csv(const std::vector<EnvelopePoint>& series);

}  // namespace safemon::metrics
