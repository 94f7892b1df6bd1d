#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "safemon/envs/car.hpp"
#include "safemon/envs/cartpole.hpp"
#include "safemon/envs/episode_io.hpp"
#include "safemon/envs/hallway.hpp"
#include "safemon/envs/racetrack.hpp"
#include "safemon/error.hpp"
#include "safemon/stl/collision.hpp"
#include "safemon/stl/parser.hpp"
#include "safemon/stl/robustness.hpp"

namespace {

using namespace safemon;
using namespace safemon::envs;

constexpr double kPi = std::numbers::pi;

// Centred in the top straight, heading along it (+x).
const CarState kCentred{10.0, 19.25, 2.5, 0.0};

TEST(Lidar, CentredPoseMatchesHandGeometry) {
  const auto world = HallwayWorld::standard();
  const auto scan = lidar_scan(kCentred, world);
  ASSERT_EQ(scan.size(), 21u);
  EXPECT_DOUBLE_EQ(scan[10], 5.0);  // far wall is 10 m ahead, clipped
  // Perpendicular distance to either wall is half the corridor width.
  EXPECT_NEAR(cast_ray({10.0, 19.25}, kPi / 2, world.walls, 5.0), 0.75, 1e-12);
  EXPECT_NEAR(cast_ray({10.0, 19.25}, -kPi / 2, world.walls, 5.0), 0.75, 1e-12);
  // The 21-ray fan has no ray at +-90 degrees; its side rays sit at +-94.5.
  const double side = 0.75 / std::cos(4.5 * kPi / 180.0);
  EXPECT_NEAR(scan[3], side, 1e-12);
  EXPECT_NEAR(scan[17], side, 1e-12);
}

TEST(Lidar, SymmetricPoseGivesMirroredScan) {
  const auto world = HallwayWorld::standard();
  const auto scan = lidar_scan(kCentred, world);
  for (std::size_t i = 0; i < scan.size(); ++i) EXPECT_NEAR(scan[i], scan[20 - i], 1e-12) << i;
}

TEST(Lidar, RangesBelowMaxLieOnAWall) {
  const auto world = HallwayWorld::standard();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> coord(0.0, 20.0);
  std::uniform_real_distribution<double> heading(-kPi, kPi);
  int checked = 0;
  while (checked < 200) {
    const double x = coord(rng);
    const double y = coord(rng);
    if (!world.inside(x, y)) continue;
    const CarState car{x, y, 2.5, heading(rng)};
    const auto scan = lidar_scan(car, world);
    for (std::size_t i = 0; i < scan.size(); ++i) {
      EXPECT_LE(scan[i], 5.0);
      if (scan[i] >= 5.0) continue;
      const double a = car[3] + world.ray_angle(i);
      const stl::Point hit{x + scan[i] * std::cos(a), y + scan[i] * std::sin(a)};
      double best = 1e9;
      for (const auto& w : world.walls) best = std::min(best, stl::distance(hit, w));
      EXPECT_LE(best, 1e-9);
    }
    ++checked;
  }
}

TEST(Lidar, OutsideTheCorridorThrows) {
  const auto world = HallwayWorld::standard();
  EXPECT_THROW(lidar_scan(CarState{10.0, 10.0, 2.5, 0.0}, world), ParameterError);
}

TEST(ApplyOod, IdentitiesAndDroppedIndices) {
  const auto world = HallwayWorld::standard();
  const auto scan = lidar_scan(kCentred, world);
  std::mt19937_64 rng(3);
  EXPECT_EQ(apply_ood(scan, OodScenario::drop_rays(0), rng), scan);
  EXPECT_EQ(apply_ood(scan, OodScenario::lidar_noise(0.0), rng), scan);

  const auto dropped = apply_ood(scan, OodScenario::drop_rays(3), rng);
  EXPECT_EQ(OodScenario::drop_rays(3).ray_indices, (std::vector<std::size_t>{5, 10, 15}));
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < dropped.size(); ++i) {
    if (i == 5 || i == 10 || i == 15) {
      EXPECT_EQ(dropped[i], 0.0);
      ++zeros;
    } else {
      EXPECT_EQ(dropped[i], scan[i]);
    }
  }
  EXPECT_EQ(zeros, 3u);
}

TEST(ApplyOod, NoiseIsNonnegativeAndClipped) {
  const auto world = HallwayWorld::standard();
  const auto scan = lidar_scan(kCentred, world);
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    const auto noisy = apply_ood(scan, OodScenario::lidar_noise(1.0), rng);
    for (std::size_t i = 0; i < scan.size(); ++i) {
      EXPECT_GE(noisy[i], scan[i]);
      EXPECT_LE(noisy[i], std::min(5.0, scan[i] + 1.0));
    }
  }
}

TEST(ApplyOod, KindMismatchThrows) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(apply_ood(std::vector<double>(21, 1.0), OodScenario::obstacles(2), rng),
               ParameterError);
}

TEST(CarStep, ZeroSteeringAdvancesStraight) {
  const CarParams p;
  const CarState s{1.0, 2.0, p.speed, 0.3};
  const CarState n = car_step(s, 0.0, p);
  EXPECT_NEAR(n[0], 1.0 + p.speed * p.dt * std::cos(0.3), 1e-12);
  EXPECT_NEAR(n[1], 2.0 + p.speed * p.dt * std::sin(0.3), 1e-12);
  EXPECT_EQ(n[2], p.speed);
  EXPECT_EQ(n[3], 0.3);
}

TEST(CarStep, ConstantSteeringTracesTheClosedFormCircle) {
  const CarParams p;
  const double steer = 0.25;
  const double radius = p.wheelbase / std::tan(steer);
  CarState s{0.0, 0.0, p.speed, 0.0};
  // Left turn from the origin heading +x: centre at (0, R).
  for (int k = 1; k <= 200; ++k) {
    s = car_step(s, steer, p);
    EXPECT_NEAR(std::hypot(s[0], s[1] - radius), radius, 1e-9);
    const double expected = wrap_angle(p.speed * p.dt * k / radius);
    EXPECT_NEAR(std::remainder(s[3] - expected, 2 * kPi), 0.0, 1e-9);
    EXPECT_GT(s[3], -kPi);
    EXPECT_LE(s[3], kPi);
  }
}

TEST(CarStep, WrapAngleAndLimits) {
  EXPECT_DOUBLE_EQ(wrap_angle(kPi), kPi);
  EXPECT_DOUBLE_EQ(wrap_angle(-kPi), kPi);
  EXPECT_NEAR(wrap_angle(3 * kPi / 2), -kPi / 2, 1e-12);
  EXPECT_THROW(car_step(kCentred, 0.5, CarParams{}), ParameterError);
}

TEST(Hallway, CentredStartStaysSafe) {
  const auto world = HallwayWorld::standard();
  const auto ep = simulate_hallway(world, {}, OodScenario::none(), 1, 200, HallwayStart{});
  EXPECT_FALSE(ep.violation_time.has_value());
  EXPECT_EQ(ep.trace.length(), 200u);
  EXPECT_EQ(ep.trace.dim(), 4u);
}

TEST(Hallway, DroppedRaysRaiseTheViolationRate) {
  const auto world = HallwayWorld::standard();
  const auto starts = hallway_start_grid(world, 50);
  int id = 0;
  int ood = 0;
  for (std::size_t s = 0; s < 50; ++s) {
    id += simulate_hallway(world, {}, OodScenario::none(), s, 200, starts[s]).violation_time.has_value();
    ood += simulate_hallway(world, {}, OodScenario::drop_rays(5), s, 200, starts[s])
               .violation_time.has_value();
  }
  EXPECT_GT(ood, id);
}

TEST(Hallway, ViolationTimeIsFirstUnsafeState) {
  const auto world = HallwayWorld::standard();
  const auto starts = hallway_start_grid(world, 20);
  for (std::size_t s = 0; s < 20; ++s) {
    const auto ep = simulate_hallway(world, {}, OodScenario::lidar_noise(1.0), s, 200, starts[s]);
    std::optional<std::size_t> first;
    for (std::size_t t = 0; t < ep.trace.length() && !first; ++t) {
      const std::vector<stl::Point> pos{{ep.trace[t][0], ep.trace[t][1]}};
      if (stl::collision_robustness(pos, std::span<const stl::Segment>(world.walls), 0.3) <= 0.0) {
        first = t;
      }
    }
    EXPECT_EQ(ep.violation_time, first);
    if (first) {
      EXPECT_EQ(ep.trace.length(), *first + 1);
    }
  }
}

TEST(Hallway, RolloutIsDeterministic) {
  const auto world = HallwayWorld::standard();
  const auto start = hallway_start_grid(world, 7)[6];
  const auto a = simulate_hallway(world, {}, OodScenario::lidar_noise(0.9), 42, 200, start);
  const auto b = simulate_hallway(world, {}, OodScenario::lidar_noise(0.9), 42, 200, start);
  EXPECT_EQ(a, b);
}

TEST(Racetrack, NoObstaclesReducesToCarStep) {
  RacetrackWorld w = racetrack_init(0, 3);
  std::mt19937_64 rng(1);
  const CarState before = w.ego;
  racetrack_step(w, 0.1, rng);
  EXPECT_EQ(w.ego, car_step(before, 0.1, w.car));
}

TEST(Racetrack, GapToSlowerLeaderShrinksMonotonically) {
  RacetrackWorld w = racetrack_init(0, 3);
  w.obstacles.push_back(Vehicle{30.0, 2.5, 6.0, 6.0, 0});
  std::mt19937_64 rng(1);
  double gap = w.obstacles[0].x - w.ego[0];
  for (int k = 0; k < 20; ++k) {
    racetrack_step(w, 0.0, rng);
    const double next = w.obstacles[0].x - w.ego[0];
    EXPECT_LT(next, gap);
    gap = next;
  }
}

TEST(Racetrack, OccupiedCellMatchesObstaclePosition) {
  RacetrackWorld w = racetrack_init(0, 3);
  w.obstacles.push_back(Vehicle{7.0, 8.0, 6.0, 6.0, 1});
  w.update_grids();
  // dx = 7 -> column floor(7/3 + 6.5) = 8; dy = 5.5 -> row floor(5.5/3 + 6.5) = 8.
  std::size_t set = 0;
  for (std::size_t i = 0; i < 13; ++i) {
    for (std::size_t j = 0; j < 13; ++j) set += w.occupancy[i][j];
  }
  EXPECT_EQ(set, 1u);
  EXPECT_EQ(w.occupancy[8][8], 1);
  // Ego at y = 2.5: row centres 2.5 and 8.5 are on the road, -0.5 and 11.5 are not.
  EXPECT_EQ(w.on_road[0][6], 1);
  EXPECT_EQ(w.on_road[0][8], 1);
  EXPECT_EQ(w.on_road[0][5], 0);
  EXPECT_EQ(w.on_road[0][9], 0);
}

TEST(Racetrack, FiveObstaclesYieldBothOutcomes) {
  int viol = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    viol += simulate_racetrack(OodScenario::obstacles(5), s, 300).violation_time.has_value();
  }
  EXPECT_GT(viol, 0);
  EXPECT_LT(viol, 50);
}

TEST(Racetrack, ViolationTimeUsesTheClearanceThreshold) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto ep = simulate_racetrack(OodScenario::obstacles(4), s, 300);
    std::optional<std::size_t> first;
    for (std::size_t t = 0; t < ep.trace.length() && !first; ++t) {
      const auto row = ep.trace[t];
      const std::vector<stl::Point> ego{{row[0], row[1]}};
      std::vector<stl::Point> obs;
      for (std::size_t k = 0; k < 4; ++k) obs.push_back({row[4 + 2 * k], row[5 + 2 * k]});
      if (stl::collision_robustness(ego, std::span<const stl::Point>(obs), 5.4) <= 0.0) first = t;
    }
    EXPECT_EQ(ep.violation_time, first);
  }
}

TEST(Racetrack, RolloutIsDeterministicAndPadsEmptySlots) {
  const auto a = simulate_racetrack(OodScenario::obstacles(2), 9, 300);
  const auto b = simulate_racetrack(OodScenario::obstacles(2), 9, 300);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.trace.dim(), 14u);
  for (std::size_t j = 8; j < 14; ++j) EXPECT_EQ(a.trace[0][j], -1000.0);
  EXPECT_THROW(simulate_racetrack(OodScenario::drop_rays(3), 1, 10), ParameterError);
}

TEST(Cartpole, AlternatingForceKeepsCartInsideDoubleIntegratorEnvelope) {
  const CartpoleParams p;
  CartpoleState s{};
  const std::size_t steps = 100;
  // Alternating +-a from rest moves the cart at most a dt^2 per pair of steps.
  const double bound = p.force_magnitude / p.cart_mass * p.dt * p.dt * steps / 2.0;
  for (std::size_t k = 0; k < steps; ++k) {
    s = cartpole_step(s, k % 2 == 0, p);
    EXPECT_LE(std::fabs(s[0]), bound);
  }
}

TEST(Cartpole, FreePendulumFallsFromAnyTilt) {
  CartpoleParams p;
  for (double theta0 : {0.01, -0.02}) {
    CartpoleState s{0.0, 0.0, theta0, 0.0};
    for (int k = 0; k < 30; ++k) {
      const auto n = cartpole_step_force(s, 0.0, p);
      EXPECT_GT(std::fabs(n[2]), std::fabs(s[2]));
      s = n;
    }
  }
}

TEST(Cartpole, EnergyDriftPerStepBelowOnePercent) {
  const CartpoleParams p;
  CartpoleState s{0.0, 0.0, 0.05, 0.0};
  double e = cartpole_energy(s, p);
  for (int k = 0; k < 20; ++k) {
    s = cartpole_step_force(s, 0.0, p);
    const double next = cartpole_energy(s, p);
    EXPECT_LE(std::fabs(next - e), 0.01 * std::fabs(e));
    e = next;
  }
}

TEST(Cartpole, NominalControllerReachesTheCap) {
  const auto c = tune_cartpole_controller(1);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto ep = simulate_cartpole(OodScenario::none(), c, s);
    EXPECT_EQ(cartpole_reward(ep), 20u);
    const auto phi = stl::parse_formula(cartpole_formula_text(), 4);
    EXPECT_GT(stl::robustness(phi, ep.trace, 0), 0.0);
  }
}

TEST(Cartpole, ThirteenDegreesAtStepSevenViolates) {
  const auto phi = stl::parse_formula(cartpole_formula_text(), 4);
  std::vector<std::vector<double>> rows(20, std::vector<double>{0.0, 0.0, 0.01, 0.0});
  rows[7][2] = 13.0 * kPi / 180.0;
  const auto trace = stl::Trace::from_rows(rows);
  EXPECT_FALSE(stl::satisfies(phi, trace, 0));
  EXPECT_NEAR(stl::robustness(phi, trace, 0), -1.0, 1e-9);
}

TEST(Cartpole, SweepPeaksAtNominalAndDecouplesLikelihoodFromSafety) {
  const auto c = tune_cartpole_controller(1);
  const auto cells = cartpole_sweep({}, c, 100, 1);
  double nominal = 0.0;
  for (const auto& cell : cells) {
    if (cell.nominal) {
      nominal = cell.mean_loglik;
      EXPECT_EQ(cell.mean_reward, 20.0);
      EXPECT_GT(cell.mean_robustness, 0.0);
    }
  }
  bool decoupled = false;
  for (const auto& cell : cells) {
    if (!cell.nominal) EXPECT_LT(cell.mean_loglik, nominal) << cell.param_name << cell.param_value;
    if (cell.mean_loglik <= nominal - 10.0 && cell.mean_robustness > 0.0) decoupled = true;
  }
  EXPECT_TRUE(decoupled);
}

TEST(EpisodeIo, RoundTripsExactly) {
  const auto dir = std::filesystem::temp_directory_path() / "safemon_episode_io";
  std::filesystem::remove_all(dir);
  const auto world = HallwayWorld::standard();
  auto ep = simulate_hallway(world, {}, OodScenario::drop_rays(5), 4, 200, hallway_start_grid(world, 4)[3]);
  ep.observations.clear();
  write_episode(ep, dir / "ep.csv");
  EXPECT_TRUE(std::filesystem::exists(dir / "ep.json"));
  EXPECT_EQ(read_episode(dir / "ep.csv"), ep);

  auto race = simulate_racetrack(OodScenario::obstacles(3), 2, 300);
  race.observations.clear();
  write_episode(race, dir / "race.csv");
  EXPECT_EQ(read_episode(dir / "race.csv"), race);
  std::filesystem::remove_all(dir);
}

TEST(EpisodeIo, MissingFileReportsPath) {
  try {
    read_episode("/nonexistent/safemon/ep.csv");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/safemon/ep"), std::string::npos);
  }
}

}  // namespace
