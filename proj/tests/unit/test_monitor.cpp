#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "safemon/error.hpp"
#include "safemon/monitor/monitor.hpp"
#include "safemon/stl/parser.hpp"

namespace {

using namespace safemon;
using namespace safemon::monitor;
using predictor::Matrix;
using predictor::Mlp;
using predictor::Predictor;
using predictor::PredictorLayout;

// Constant-velocity extrapolation of a 1-D state plus a fixed offset `bias`
// on every predicted step (zero network with output bias).
Predictor cv_predictor(double bias) {
  PredictorLayout L;
  L.state_dim = 1;
  L.learned_dims = {0};
  L.constant_velocity_baseline = true;
  Mlp net({L.input_dim(), 4, L.output_dim()});
  for (std::size_t k = 0; k < L.output_dim(); ++k) net.parameters()[net.bias_offset(1) + k] = bias;
  return Predictor(L, net);
}

incremental::DistributionPredictorSet dp_for(const Predictor& p) {
  predictor::Window w;
  w.history = Matrix(5, 1, 1.0);
  w.horizon = Matrix(5, 1, 1.0);
  return incremental::DistributionPredictorSet(p, {w, w});
}

SafetySpec positive_spec() { return SafetySpec::from_formula(stl::parse_formula("G[0,4] (s[0] > 0)", 1)); }

stl::Trace stream(const std::vector<double>& values) {
  stl::Trace t(1);
  for (double v : values) t.push_back(std::vector<double>{v});
  return t;
}

std::vector<double> random_walk(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> step(0.0, 0.6);
  std::vector<double> v{3.0};
  while (v.size() < n) v.push_back(v.back() + step(rng));
  return v;
}

MonitorConfig config(UqMode mode) {
  MonitorConfig c;
  c.uq_mode = mode;
  c.position_y = 0;  // 1-D states: ADE measured on the single column
  return c;
}

TEST(Monitor, RecordPresenceFollowsTheSchedule) {
  const auto p = cv_predictor(0.0);
  const auto dp = dp_for(p);
  const auto cfg = config(UqMode::ACP);
  const auto run = run_episode(cfg, dp, positive_spec(), stream(random_walk(1, 60)));
  ASSERT_EQ(run.records.size(), 60u);
  for (const auto& r : run.records) {
    EXPECT_EQ(r.rho_hat.has_value(), r.t + 1 >= cfg.h) << r.t;
    EXPECT_EQ(r.ncs.has_value(), r.t > cfg.h + cfg.H) << r.t;
    EXPECT_EQ(r.threshold.has_value(), r.t > cfg.t0) << r.t;
    EXPECT_EQ(r.e_t.has_value(), r.t > cfg.t0) << r.t;
    if (r.t <= cfg.t0) EXPECT_FALSE(r.alarm);
    if (r.ncs) {
      // R_t pairs the forecast issued H steps earlier with its realised window.
      EXPECT_EQ(*r.ncs, *run.records[r.t - cfg.H].rho_hat - *r.rho_lagged);
    }
  }
}

TEST(Monitor, PerfectPointPredictorOnSafeStreamNeverAlarms) {
  const auto p = cv_predictor(0.0);
  const auto dp = dp_for(p);
  std::vector<double> values;
  for (int t = 0; t < 80; ++t) values.push_back(1.0 + t);
  const auto run = run_episode(config(UqMode::PP), dp, positive_spec(), stream(values));
  for (const auto& r : run.records) {
    EXPECT_FALSE(r.alarm);
    if (r.ncs) EXPECT_EQ(*r.ncs, 0.0);
    if (r.threshold) EXPECT_EQ(r.threshold->value, 0.0);
    if (r.ade) EXPECT_EQ(*r.ade, 0.0);
  }
}

TEST(Monitor, AcpLearnsAnOptimisticBias) {
  const double b = 1.0;
  const auto p = cv_predictor(b);
  const auto dp = dp_for(p);
  const auto cfg = config(UqMode::ACP);
  // Constant true robustness: R_t = b every step, so C_t = b and e_t = 0,
  // and delta_t rises by gamma * delta per update.
  for (double level : {2.0, -0.5, 0.375}) {
    const auto run = run_episode(cfg, dp, positive_spec(), stream(std::vector<double>(100, level)));
    std::size_t updates = 0;
    for (const auto& r : run.records) {
      if (!r.threshold) continue;
      EXPECT_EQ(r.threshold->value, b);
      EXPECT_EQ(*r.e_t, 0);
      EXPECT_NEAR(r.delta_t, cfg.delta + cfg.gamma * cfg.delta * static_cast<double>(updates), 1e-12);
      ++updates;
      // Alarm iff rho_hat < b, i.e. the true robustness is negative.
      EXPECT_EQ(r.alarm, level < 0.0) << level;
    }
    EXPECT_EQ(updates, 100u - cfg.t0 - 1);
  }
}

// Independent replay of the listed order: append R_t, take the
// ceil(n (1 - delta_t))-th smallest, score, update.
TEST(Monitor, AcpMatchesHandSimulation) {
  const auto p = cv_predictor(0.3);
  const auto dp = dp_for(p);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto cfg = config(UqMode::ACP);
    cfg.gamma = 0.05;
    const auto run = run_episode(cfg, dp, positive_spec(), stream(random_walk(seed, 200)));
    std::vector<double> R;
    double delta_t = cfg.delta;
    for (const auto& r : run.records) {
      if (!r.ncs) continue;
      R.push_back(*r.ncs);
      if (r.t <= cfg.t0) continue;
      std::vector<double> sorted = R;
      std::sort(sorted.begin(), sorted.end());
      const double n = static_cast<double>(sorted.size());
      double c;
      if (delta_t <= 0.0) {
        c = std::numeric_limits<double>::infinity();
      } else if (delta_t >= 1.0) {
        c = -std::numeric_limits<double>::infinity();
      } else {
        const auto k = static_cast<long>(std::ceil(n * (1.0 - delta_t) - 1e-9));
        c = k < 1 ? -std::numeric_limits<double>::infinity() : sorted[static_cast<std::size_t>(k - 1)];
      }
      const int e = *r.ncs > c ? 1 : 0;
      EXPECT_EQ(r.delta_t, delta_t);
      EXPECT_EQ(r.threshold->value, c);
      EXPECT_EQ(*r.e_t, e);
      EXPECT_EQ(r.alarm, *r.rho_hat < c);
      delta_t += cfg.gamma * (cfg.delta - e);
    }
  }
}

TEST(Monitor, NonPositiveDeltaForcesAnAlarm) {
  const auto p = cv_predictor(0.0);
  const auto dp = dp_for(p);
  auto cfg = config(UqMode::ACP);
  cfg.gamma = 1.0;  // one miscoverage sends delta_t to -0.8
  std::size_t seen = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto run = run_episode(cfg, dp, positive_spec(), stream(random_walk(seed, 150)));
    for (const auto& r : run.records) {
      if (!r.threshold || r.delta_t > 0.0) continue;
      ++seen;
      EXPECT_EQ(r.threshold->value, std::numeric_limits<double>::infinity());
      EXPECT_TRUE(r.alarm);
      EXPECT_EQ(*r.e_t, 0);
    }
  }
  EXPECT_GT(seen, 0u);
}

TEST(Monitor, RecordedErrorsObeyTheLongRunBound) {
  const auto p = cv_predictor(-0.2);
  const auto dp = dp_for(p);
  const auto cfg = config(UqMode::ACP);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto run = run_episode(cfg, dp, positive_spec(), stream(random_walk(seed, 400)));
    double errors = 0.0;
    std::size_t T = 0;
    for (const auto& r : run.records) {
      if (!r.e_t) continue;
      errors += *r.e_t;
      ++T;
      const auto b = conformal::coverage_bounds(T, cfg.delta, cfg.gamma, cfg.delta);
      EXPECT_LE(std::fabs(errors / static_cast<double>(T) - cfg.delta), b.prop1_bound);
    }
  }
}

TEST(Monitor, ScoresNeverReadFutureStates) {
  const auto p = cv_predictor(0.1);
  const auto dp = dp_for(p);
  const auto cfg = config(UqMode::ACP);
  const auto values = random_walk(3, 60);
  const auto clean = run_episode(cfg, dp, positive_spec(), stream(values));
  for (std::size_t cut : {cfg.t0, cfg.t0 + 7, std::size_t{59}}) {
    auto poisoned = values;
    for (std::size_t t = cut + 1; t < poisoned.size(); ++t) poisoned[t] = std::numeric_limits<double>::quiet_NaN();
    const auto trace = stream(poisoned);
    Monitor m(cfg, dp, positive_spec());
    for (std::size_t t = 0; t <= cut; ++t) {
      const auto rec = m.step(trace[t]);
      EXPECT_EQ(rec, clean.records[t]) << "t=" << t << " cut=" << cut;
      if (rec.ncs) EXPECT_TRUE(std::isfinite(*rec.ncs));
    }
  }
}

TEST(Monitor, HighErrorStepsCollectExactWindows) {
  const auto p = cv_predictor(0.0);
  const auto dp = dp_for(p);
  auto cfg = config(UqMode::ACP);
  cfg.tau = 0.5;
  const auto values = random_walk(8, 120);
  const auto run = run_episode(cfg, dp, positive_spec(), stream(values), std::nullopt, 17);
  std::size_t expected = 0;
  for (const auto& r : run.records) {
    if (!r.threshold || std::fabs(*r.ncs) <= cfg.tau) continue;
    ASSERT_LT(expected, run.collected.size());
    const auto& w = run.collected[expected++];
    EXPECT_EQ(w.history.rows + w.horizon.rows, cfg.h + cfg.H);
    EXPECT_EQ(w.episode_id, 17);
    const std::size_t first = r.t + 1 - cfg.h - cfg.H;
    EXPECT_EQ(static_cast<std::size_t>(w.start_time), first);
    for (std::size_t k = 0; k < cfg.h; ++k) EXPECT_EQ(w.history(k, 0), values[first + k]);
    for (std::size_t k = 0; k < cfg.H; ++k) EXPECT_EQ(w.horizon(k, 0), values[first + cfg.h + k]);
  }
  EXPECT_EQ(run.collected.size(), expected);
  EXPECT_GT(expected, 0u);
}

TEST(Monitor, LoweringDeltaNeverRemovesFrozenAlarms) {
  const auto p = cv_predictor(0.0);
  const auto dp = dp_for(p);
  std::vector<stl::Trace> calib;
  for (std::uint64_t s = 100; s < 140; ++s) calib.push_back(stream(random_walk(s, 40)));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto trace = stream(random_walk(seed, 150));
    std::vector<bool> prev;
    for (double delta : {0.3, 0.2, 0.1, 0.05}) {
      auto cfg = config(UqMode::CP);
      cfg.delta = delta;
      const auto offline = build_offline_calibration(calib, p, positive_spec(), cfg, 5);
      const auto run = run_episode(cfg, dp, positive_spec(), trace, offline);
      std::vector<bool> alarms;
      for (const auto& r : run.records) alarms.push_back(r.alarm);
      for (std::size_t i = 0; i < prev.size(); ++i) {
        if (prev[i]) EXPECT_TRUE(alarms[i]);
      }
      prev = alarms;
    }
  }
}

TEST(Monitor, FrozenModesUseTheOfflineThreshold) {
  const auto p = cv_predictor(0.0);
  const auto dp = dp_for(p);
  const conformal::NcsSet offline(std::vector<double>{0.5, -0.1, 0.2, 0.9, 0.0, 0.3, 0.1, 0.4, 0.6});
  auto cfg = config(UqMode::RCP);
  cfg.epsilon = 0.0;
  // n = 9: ceil(10 * 0.9) = 9 -> largest score.
  const auto run = run_episode(cfg, dp, positive_spec(), stream(random_walk(2, 50)), offline);
  for (const auto& r : run.records) {
    if (!r.threshold) continue;
    EXPECT_EQ(r.threshold->value, 0.9);
    EXPECT_EQ(*r.e_t, *r.ncs > 0.9 ? 1 : 0);
    EXPECT_EQ(r.delta_t, cfg.delta);
  }
  EXPECT_THROW(run_episode(config(UqMode::CP), dp, positive_spec(), stream(random_walk(2, 50))),
               ConfigError);
}

TEST(Monitor, ShortTracesAndBadConfigs) {
  const auto p = cv_predictor(0.0);
  const auto dp = dp_for(p);
  const auto cfg = config(UqMode::ACP);
  const auto run = run_episode(cfg, dp, positive_spec(), stream(std::vector<double>(cfg.t0, -1.0)));
  for (const auto& r : run.records) EXPECT_FALSE(r.alarm);
  EXPECT_THROW(run_episode(cfg, dp, positive_spec(), stream(std::vector<double>(cfg.t0 - 1, 1.0))),
               HorizonError);

  auto bad = cfg;
  bad.t0 = 10;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = cfg;
  bad.delta = 1.0;
  EXPECT_THROW(bad.validate(), ConfigError);

  Monitor m(cfg, dp, positive_spec());
  EXPECT_THROW(m.step(std::vector<double>{1.0, 2.0}), ShapeError);
  EXPECT_THROW(Monitor(cfg, dp, SafetySpec::from_formula(stl::parse_formula("G[0,5] (s[0] > 0)", 1))),
               HorizonError);
}

TEST(Monitor, RerunIsBitIdentical) {
  const auto p = cv_predictor(0.2);
  const auto dp = dp_for(p);
  const auto trace = stream(random_walk(4, 90));
  const auto a = run_episode(config(UqMode::ACP), dp, positive_spec(), trace);
  const auto b = run_episode(config(UqMode::ACP), dp, positive_spec(), trace);
  EXPECT_EQ(a.records, b.records);
  EXPECT_EQ(records_csv(a.records), records_csv(b.records));
}

TEST(OfflineCalibration, OneScorePerTrace) {
  const auto p = cv_predictor(0.0);
  const auto cfg = config(UqMode::CP);
  std::vector<double> line;
  for (int t = 0; t < 30; ++t) line.push_back(2.0 + t);
  EXPECT_EQ(build_offline_calibration({stream(line)}, p, positive_spec(), cfg, 1).size(), 1u);
  const std::vector<stl::Trace> many(7, stream(line));
  const auto set = build_offline_calibration(many, p, positive_spec(), cfg, 1);
  ASSERT_EQ(set.size(), 7u);
  for (double s : set.sorted()) EXPECT_EQ(s, 0.0);  // exact predictor on a line
  EXPECT_THROW(build_offline_calibration({stream(std::vector<double>(9, 1.0))}, p, positive_spec(), cfg, 1),
               HorizonError);
}

TEST(SafetySpecTest, AgentCollisionIsTimeAligned) {
  // Rows: ego (x, y), agent (x, y). The agent reaches the ego's row-0 spot only
  // at row 1, when the ego has moved on.
  Matrix w(2, 4);
  w(0, 0) = 0.0; w(0, 1) = 0.0; w(0, 2) = 10.0; w(0, 3) = 0.0;
  w(1, 0) = 3.0; w(1, 1) = 0.0; w(1, 2) = 0.0;  w(1, 3) = 0.0;
  const auto spec = SafetySpec::agent_collision({{2, 3}}, 1.0);
  EXPECT_DOUBLE_EQ(spec.robustness(w), 2.0);
  const auto walls = SafetySpec::wall_collision({stl::Segment{{-1.0, 1.0}, {5.0, 1.0}}}, 0.3);
  EXPECT_DOUBLE_EQ(walls.robustness(w), 0.7);
}

TEST(RecordsCsv, RoundTripsIncludingInfiniteThresholds) {
  std::vector<StepRecord> recs(3);
  recs[0].t = 0;
  recs[0].delta_t = 0.1;
  recs[1].t = 1;
  recs[1].rho_hat = 0.123456789012345;
  recs[1].rho_lagged = -2.5;
  recs[1].ncs = 1e-17;
  recs[1].threshold = conformal::RegionThreshold::plus_infinity();
  recs[1].delta_t = -0.0125;
  recs[1].e_t = 0;
  recs[1].alarm = true;
  recs[1].selected_predictor = "D1";
  recs[1].ade = 0.25;
  recs[2].t = 2;
  recs[2].threshold = conformal::RegionThreshold::minus_infinity();
  recs[2].e_t = 1;
  recs[2].delta_t = 1.2;
  const auto text = "# config_hash=abc seed=1\n" + records_csv(recs);
  EXPECT_EQ(parse_records_csv(text), recs);
  EXPECT_THROW(parse_records_csv("t,wrong\n"), ParseError);
}

}  // namespace
