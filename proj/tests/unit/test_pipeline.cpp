#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>

#include "safemon/envs/hallway.hpp"
#include "safemon/error.hpp"
#include "safemon/experiment/pipeline.hpp"
#include "safemon/io.hpp"
#include "safemon/metrics/metrics.hpp"

namespace {

using namespace safemon;
using namespace safemon::experiment;
namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / (std::string("safemon_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  [[nodiscard]] const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

ExperimentConfig tiny_hallway() {
  auto c = default_config("hallway");
  c.id_episodes = 40;
  c.max_steps = 60;
  c.train.epochs = 2;
  c.fine_tune.epochs = 2;
  c.hidden = {8};
  c.trials = 1;
  c.eval_episodes = 3;
  c.collection_episodes = 3;
  c.scenarios = {"none", "drop_rays_5"};
  // Six validation traces are too few for a robust epsilon.
  c.uq_modes = {"PP", "CP", "ACP"};
  return c;
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_file(e.path());
  }
  return files;
}

void run_all(const ExperimentConfig& c, const fs::path& out) {
  generate(c, out);
  const auto data = load_dataset(c, out);
  const auto model = train(c, data, out);
  run_monitoring(c, data, model, out);
  report(c, out);
}

}  // namespace

TEST(Pipeline, SlidingWindowsCoverEveryStrideStart) {
  stl::Trace t(2);
  for (int i = 0; i < 23; ++i) t.push_back(std::vector<double>{double(i), -double(i)});
  for (std::size_t stride : {1u, 2u, 5u}) {
    const auto w = sliding_windows(t, 5, 5, stride, 7);
    // Starts 0, stride, ... while start + 10 <= 23.
    EXPECT_EQ(w.size(), (23 - 10) / stride + 1);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const auto s = static_cast<double>(i * stride);
      EXPECT_EQ(w[i].start_time, static_cast<long>(i * stride));
      EXPECT_EQ(w[i].episode_id, 7);
      EXPECT_EQ(w[i].history(0, 0), s);
      EXPECT_EQ(w[i].history(4, 1), -(s + 4));
      EXPECT_EQ(w[i].horizon(0, 0), s + 5);
      EXPECT_EQ(w[i].horizon(4, 0), s + 9);
    }
  }
  stl::Trace short_trace(2);
  for (int i = 0; i < 9; ++i) short_trace.push_back(std::vector<double>{0.0, 0.0});
  EXPECT_TRUE(sliding_windows(short_trace, 5, 5, 1, 0).empty());
  EXPECT_THROW(sliding_windows(t, 5, 5, 0, 0), ParameterError);
}

TEST(Pipeline, CrashLabelsFollowHorizonRobustness) {
  const auto spec = study_spec(default_config("hallway"));
  auto window_at = [](double y_last) {
    predictor::Window w{predictor::Matrix(5, 4), predictor::Matrix(5, 4)};
    for (std::size_t r = 0; r < 5; ++r) {
      w.history(r, 0) = w.horizon(r, 0) = 10.0;
      w.history(r, 1) = w.horizon(r, 1) = 19.25;
    }
    w.horizon(4, 1) = y_last;
    return w;
  };
  // The outer wall sits at y = 20; clearance 0.3 fails past y = 19.7.
  const auto labels = crash_labels({window_at(19.25), window_at(19.69), window_at(19.71), window_at(19.9)}, spec);
  EXPECT_EQ(labels, (std::vector<bool>{false, false, true, true}));
}

TEST(Pipeline, GenerateSplitsDeterministically) {
  TempDir dir;
  auto c = tiny_hallway();
  const auto r = generate(c, dir.path());
  // Oracle: simulate the same seeds and count short episodes directly.
  std::size_t short_count = 0;
  for (std::size_t i = 0; i < c.id_episodes; ++i) {
    const auto ep = simulate(c, envs::OodScenario::none(), derive_seed(c.seed, "id", i), i);
    short_count += ep.trace.length() < c.min_length ? 1 : 0;
  }
  EXPECT_EQ(r.simulated, c.id_episodes);
  EXPECT_EQ(r.filtered, short_count);
  const std::size_t kept = r.simulated - r.filtered;
  EXPECT_EQ(r.train, static_cast<std::size_t>(std::floor(0.65 * double(kept))));
  EXPECT_EQ(r.validation, static_cast<std::size_t>(std::floor(0.15 * double(kept))));
  EXPECT_EQ(r.train + r.validation + r.test, kept);
  const auto data = load_dataset(c, dir.path());
  EXPECT_EQ(data.train.size(), r.train);
  EXPECT_EQ(data.test.size(), r.test);

  const auto manifest = read_file(dir.path() / "data" / "manifest.json");
  generate(c, dir.path());
  EXPECT_EQ(read_file(dir.path() / "data" / "manifest.json"), manifest);

  c.min_length = c.max_steps + 1;
  const auto all_short = generate(c, dir.path());
  EXPECT_EQ(all_short.filtered, c.id_episodes);
  EXPECT_EQ(all_short.train + all_short.validation + all_short.test, 0u);

  c.id_episodes = 0;
  const auto none = generate(c, dir.path());
  EXPECT_EQ(none.simulated, 0u);
  EXPECT_EQ(none.warnings.size(), 1u);
  const auto j = nlohmann::json::parse(read_file(dir.path() / "data" / "manifest.json"));
  EXPECT_TRUE(j["splits"]["train"].empty());
}

TEST(Pipeline, EndToEndRerunIsByteIdentical) {
  TempDir a, b;
  const auto c = tiny_hallway();
  run_all(c, a.path() / "x");
  run_all(c, b.path() / "x");
  const auto sa = snapshot(a.path() / "x");
  const auto sb = snapshot(b.path() / "x");
  EXPECT_EQ(sa, sb);
  // Both arms of every mode, per scenario and trial.
  for (const auto& s : c.scenarios) {
    for (const auto& m : c.uq_modes) {
      EXPECT_TRUE(sa.contains("runs/" + s + "/trial_0/" + m + ".csv")) << s << m;
      EXPECT_TRUE(sa.contains("runs/" + s + "/trial_0/" + m + "_il.csv")) << s << m;
    }
  }
  for (const char* f : {"report/summary.json", "report/cells.csv", "report/coverage.csv", "report/tv.csv",
                        "report/ade.csv", "report/envelope_none_ACP.csv", "report/ncs_kde_drop_rays_5.csv"}) {
    EXPECT_TRUE(sa.contains(f)) << f;
  }
  // Every emitted text file carries the provenance line.
  const std::string prov = provenance_line(c);
  for (const auto& [name, text] : sa) {
    if (name.ends_with(".csv") && !name.starts_with("data/")) EXPECT_EQ(text.rfind(prov, 0), 0u) << name;
  }
  const auto summary = nlohmann::json::parse(sa.at("report/summary.json"));
  EXPECT_EQ(summary["config_hash"], config_hash(c));
  EXPECT_EQ(summary["most_severe"], "drop_rays_5");
}

TEST(Pipeline, StagesRefuseArtifactsFromAnotherConfig) {
  TempDir dir;
  const auto c = tiny_hallway();
  run_all(c, dir.path());
  auto other = c;
  other.seed = 2;
  EXPECT_THROW(load_dataset(other, dir.path()), ConfigError);
  EXPECT_THROW(load_model(other, dir.path()), ConfigError);
  EXPECT_THROW(report(other, dir.path()), ConfigError);
  EXPECT_THROW(read_cell(dir.path() / "runs" / "none" / "trial_0" / "ACP.csv", config_hash(other)), ConfigError);

  const auto eps = read_cell(dir.path() / "runs" / "none" / "trial_0" / "ACP.csv", config_hash(c));
  EXPECT_FALSE(eps.empty());
  for (const auto& e : eps) EXPECT_EQ(e.records.size(), 60u);
}

TEST(Pipeline, ReportWithoutRecordsFails) {
  TempDir dir;
  EXPECT_THROW(report(tiny_hallway(), dir.path()), EmptyInputError);
}

TEST(Pipeline, RobustModeNeedsAFeasibleEpsilon) {
  TempDir dir;
  auto c = tiny_hallway();
  c.uq_modes = {"RCP"};
  generate(c, dir.path());
  const auto data = load_dataset(c, dir.path());
  const auto model = train(c, data, dir.path());
  ASSERT_FALSE(model.epsilon.has_value());
  try {
    run_monitoring(c, data, model, dir.path());
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "monitor.epsilon");
  }
}

TEST(Pipeline, AcpAlarmsAheadOfAHallwayCrash) {
  // Pure constant-velocity forecasts (zero residual network) on a seeded
  // five-missing-rays episode that runs into a wall.
  auto c = default_config("hallway");
  const auto layout = study_layout(c);
  const predictor::Predictor cv(layout, predictor::Mlp({layout.input_dim(), 4, layout.output_dim()}));
  const auto spec = study_spec(c);
  const auto scenario = envs::OodScenario::drop_rays(5);
  std::optional<envs::Episode> crash;
  for (std::uint64_t s = 0; s < 50 && !crash; ++s) {
    auto ep = simulate(c, scenario, derive_seed(99, "crash", s), s);
    if (ep.violation_time && *ep.violation_time > c.monitor.t0 + c.monitor.H) crash = std::move(ep);
  }
  ASSERT_TRUE(crash.has_value());
  const incremental::DistributionPredictorSet dp(cv, sliding_windows(crash->trace, 5, 5, 1, 0));
  const auto run = monitor::run_episode(monitor_config(c, monitor::UqMode::ACP, 0.0, 0.0), dp, spec, crash->trace);
  const auto outcome = metrics::EpisodeOutcome::from_records(0, crash->violation_time, run.records);
  const auto cls = metrics::classify_episode(outcome, c.monitor.H);
  EXPECT_EQ(cls.outcome, metrics::Outcome::TP);
  ASSERT_TRUE(cls.timeliness.has_value());
  EXPECT_GE(*cls.timeliness, 1u);
  EXPECT_LE(*cls.timeliness, c.monitor.H);
}
