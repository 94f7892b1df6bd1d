#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "safemon/conformal/conformal.hpp"
#include "safemon/experiment/config.hpp"
#include "safemon/experiment/pipeline.hpp"
#include "safemon/incremental/kmeans.hpp"
#include "safemon/stl/parser.hpp"
#include "safemon/stl/robustness.hpp"

using namespace safemon;

static void BM_RobustnessSignal(benchmark::State& state) {
  const auto f = stl::parse_formula("G[0,19] ((12 - abs(s[3]) > 0) & (2.4 - abs(s[0]) > 0))", 4);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  stl::Trace trace(4);
  for (long t = 0; t < state.range(0); ++t) trace.push_back(std::vector<double>{n(rng), n(rng), n(rng), n(rng)});
  for (auto _ : state) benchmark::DoNotOptimize(stl::robustness_signal(f, trace, 0, trace.length() - 20));
}
BENCHMARK(BM_RobustnessSignal)->Arg(100)->Arg(1000);

static void BM_AcpStep(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> init(static_cast<std::size_t>(state.range(0)));
  for (double& x : init) x = n(rng);
  conformal::NcsSet ncs(init);
  auto acp = conformal::AcpState::initial(0.1, 0.005);
  for (auto _ : state) benchmark::DoNotOptimize(conformal::acp_step(acp, ncs, n(rng)));
}
BENCHMARK(BM_AcpStep)->Arg(100)->Arg(10000);

static void BM_IcpThreshold(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> xs(static_cast<std::size_t>(state.range(0)));
  for (double& x : xs) x = n(rng);
  const conformal::NcsSet ncs(xs);
  for (auto _ : state) benchmark::DoNotOptimize(conformal::icp_threshold(ncs, 0.1));
}
BENCHMARK(BM_IcpThreshold)->Arg(1000);

static void BM_KMeans(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<incremental::Point> pts(2000, incremental::Point(40));
  for (auto& p : pts)
    for (double& x : p) x = n(rng);
  for (auto _ : state) benchmark::DoNotOptimize(incremental::kmeans(pts, static_cast<std::size_t>(state.range(0)), 5));
}
BENCHMARK(BM_KMeans)->Arg(2)->Arg(6);

static void BM_HallwayEpisode(benchmark::State& state) {
  const auto c = experiment::default_config("hallway");
  std::uint64_t seed = 0;
  for (auto _ : state) {
    ++seed;
    benchmark::DoNotOptimize(experiment::simulate(c, envs::OodScenario::none(), seed, seed));
  }
}
BENCHMARK(BM_HallwayEpisode);
BENCHMARK_MAIN();
