#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include <nlohmann/json.hpp>

#include "safemon/conformal/conformal.hpp"
#include "safemon/error.hpp"
#include "safemon/metrics/metrics.hpp"

namespace {

using namespace safemon;
using namespace safemon::metrics;

EpisodeOutcome outcome(std::optional<std::size_t> v, std::vector<std::size_t> alarms) {
  EpisodeOutcome o;
  o.violation_time = v;
  o.alarm_times = std::move(alarms);
  return o;
}

TEST(Classify, ExamplesFromTheRule) {
  auto c = classify_episode(outcome(100, {96}), 5);
  EXPECT_EQ(c.outcome, Outcome::TP);
  EXPECT_EQ(c.timeliness, 4u);
  EXPECT_EQ(classify_episode(outcome(100, {80}), 5).outcome, Outcome::FN);
  EXPECT_EQ(classify_episode(outcome(std::nullopt, {}), 5).outcome, Outcome::TN);
  EXPECT_EQ(classify_episode(outcome(std::nullopt, {3}), 5).outcome, Outcome::FP);
  // Alarm at the violation step itself is not advance warning.
  EXPECT_EQ(classify_episode(outcome(100, {100}), 5).outcome, Outcome::FN);
  // Earliest alarm inside the window sets the timeliness.
  EXPECT_EQ(classify_episode(outcome(100, {90, 95, 99}), 5).timeliness, 5u);
}

TEST(Classify, AnyTimeRuleCountsEarlyAlarmsWithCappedTimeliness) {
  const auto c = classify_episode(outcome(100, {80}), 5, true);
  EXPECT_EQ(c.outcome, Outcome::TP);
  EXPECT_EQ(c.timeliness, 5u);
}

TEST(Aggregate, HandCountedConfusionMatrix) {
  // TP (t=2), TP (t=5), FN, FN (early alarm only), FP, FP, TN.
  const std::vector<EpisodeOutcome> set{
      outcome(50, {48}), outcome(30, {25, 29}), outcome(40, {}), outcome(60, {20}),
      outcome(std::nullopt, {7}), outcome(std::nullopt, {1, 2}), outcome(std::nullopt, {})};
  const auto s = aggregate(set, 5, 0.0);
  EXPECT_EQ(s.tp, 2u);
  EXPECT_EQ(s.fn, 2u);
  EXPECT_EQ(s.fp, 2u);
  EXPECT_EQ(s.tn, 1u);
  EXPECT_DOUBLE_EQ(*s.precision, 0.5);
  EXPECT_DOUBLE_EQ(*s.recall, 0.5);
  EXPECT_DOUBLE_EQ(*s.timeliness, 3.5);
}

TEST(Aggregate, AllTruePositivesAndHalfHalf) {
  const auto all = aggregate({outcome(10, {9}), outcome(20, {17})}, 5, 0.0);
  EXPECT_EQ(*all.precision, 1.0);
  EXPECT_EQ(*all.recall, 1.0);
  const auto half = aggregate({outcome(10, {9}), outcome(std::nullopt, {3}), outcome(20, {})}, 5, 0.0);
  EXPECT_EQ(*half.precision, 0.5);
  EXPECT_EQ(*half.recall, 0.5);
}

TEST(Aggregate, UndefinedPrecisionStaysAbsent) {
  const auto s = aggregate({outcome(10, {}), outcome(std::nullopt, {})}, 5, 0.0);
  EXPECT_FALSE(s.precision.has_value());
  EXPECT_EQ(*s.recall, 0.0);
  EXPECT_FALSE(s.timeliness.has_value());
  const auto j = nlohmann::json::parse(summary_json(s));
  EXPECT_TRUE(j["precision"].is_null());
  EXPECT_THROW(aggregate({}, 5, 0.0), EmptyInputError);
}

TEST(Aggregate, CoverageExceedanceAndAdeFromRecords) {
  std::vector<monitor::StepRecord> recs(4);
  for (std::size_t i = 0; i < 4; ++i) {
    recs[i].t = 16 + i;
    recs[i].ncs = 0.1 * static_cast<double>(i + 1);
    recs[i].threshold = conformal::RegionThreshold{0.25};
    recs[i].e_t = *recs[i].ncs > 0.25 ? 1 : 0;
    recs[i].ade = static_cast<double>(i);
  }
  const auto o = EpisodeOutcome::from_records(0, std::nullopt, recs);
  const auto s = aggregate({o}, 5, 0.15);
  EXPECT_DOUBLE_EQ(*s.empirical_coverage, 0.5);
  EXPECT_DOUBLE_EQ(*s.p_exceed_tau, 0.75);
  EXPECT_DOUBLE_EQ(*s.ade, 1.5);
}

TEST(Aggregate, PartitionAndTimelinessBoundsOnRandomOutcomes) {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<EpisodeOutcome> set;
    const int n = 1 + static_cast<int>(rng() % 30);
    for (int i = 0; i < n; ++i) {
      std::optional<std::size_t> v;
      if (rng() % 2) v = 5 + rng() % 60;
      std::vector<std::size_t> alarms;
      for (std::size_t t = 0; t < 70; ++t) {
        if (rng() % 25 == 0) alarms.push_back(t);
      }
      set.push_back(outcome(v, alarms));
    }
    const auto s = aggregate(set, 5, 0.0);
    EXPECT_EQ(s.tp + s.fp + s.fn + s.tn, static_cast<std::size_t>(n));
    for (auto t : s.timeliness_values) {
      EXPECT_GE(t, 1u);
      EXPECT_LE(t, 5u);
    }
    if (s.precision) EXPECT_LE(*s.precision, 1.0);
    if (s.recall) EXPECT_LE(*s.recall, 1.0);
  }
}

TEST(Envelope, FirstPrefixAndConstants) {
  const auto one = coverage_envelope_series(std::vector<int>{0}, 0.1, 0.005, 0.1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].empirical, 1.0);
  const auto series = coverage_envelope_series(std::vector<int>(1000, 0), 0.1, 0.005, 0.1);
  EXPECT_NEAR(series.back().lower, 0.9 - 0.021, 1e-12);
  EXPECT_NEAR(series.back().upper, 0.9 + 0.181, 1e-12);
  for (const auto& p : series) EXPECT_LE(p.lower, p.upper);
}

TEST(Envelope, AnyAcpRunStaysInsideOnEveryPrefix) {
  std::mt19937_64 rng(9);
  std::vector<std::vector<int>> pooled;
  for (int rep = 0; rep < 30; ++rep) {
    auto state = conformal::AcpState::initial(0.1, 0.005);
    conformal::NcsSet ncs;
    std::normal_distribution<double> g(0.0, 1.0);
    // Drifting scale makes the stream adversarial for a fixed quantile.
    for (int t = 0; t < 1500; ++t) {
      const double drift = 1.0 + 0.01 * t * (rep % 3);
      conformal::acp_step(state, ncs, g(rng) * drift);
    }
    for (const auto& p : coverage_envelope_series(state.error_history, 0.1, 0.005, 0.1)) {
      EXPECT_GE(p.empirical, p.lower) << p.T;
      EXPECT_LE(p.empirical, p.upper) << p.T;
    }
    pooled.push_back(state.error_history);
    pooled.back().resize(500 + 30 * static_cast<std::size_t>(rep));
  }
  for (const auto& p : pooled_envelope_series(pooled, 0.1, 0.005, 0.1)) {
    EXPECT_GE(p.empirical, p.lower);
    EXPECT_LE(p.empirical, p.upper);
  }
}

TEST(Envelope, CsvHasOneRowPerPrefix) {
  const auto csv = envelope_csv(coverage_envelope_series(std::vector<int>{0, 1, 0}, 0.1, 0.005, 0.1));
  EXPECT_EQ(csv.rfind("T,empirical,lower,upper\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

TEST(AlarmFreeSatisfaction, CountsOnlyStepsBeforeTheFirstAlarm) {
  std::vector<monitor::StepRecord> recs(40);
  for (std::size_t t = 0; t < recs.size(); ++t) {
    recs[t].t = t;
    recs[t].rho_lagged = t == 27 ? -1.0 : 1.0;
  }
  recs[30].alarm = true;
  // Steps 16..29 are alarm-free; each needs rho_lagged at t + 5, so window
  // 22 (resolved at 27) is the only unsafe one.
  const auto c = alarm_free_satisfaction({recs}, 15, 5, 0.1, 0.005);
  EXPECT_EQ(c.steps, 14u);
  EXPECT_EQ(c.satisfied, 13u);
  EXPECT_DOUBLE_EQ(c.bound, 0.9 - 0.105 / (14 * 0.005));
}

TEST(Trials, MeanAndStdSkipUndefinedTrials) {
  MetricsSummary a;
  a.precision = 0.5;
  a.recall = 1.0;
  MetricsSummary b;
  b.recall = 0.5;
  const auto s = summarize_trials({a, b});
  EXPECT_EQ(s.precision->trials, 1u);
  EXPECT_DOUBLE_EQ(s.precision->mean, 0.5);
  EXPECT_DOUBLE_EQ(s.recall->mean, 0.75);
  EXPECT_DOUBLE_EQ(s.recall->std, 0.25);
  EXPECT_FALSE(s.timeliness.has_value());
  const auto j = nlohmann::json::parse(trial_summary_json(s));
  EXPECT_EQ(j["trials"].size(), 2u);
  EXPECT_TRUE(j["timeliness"].is_null());
}

}  // namespace
