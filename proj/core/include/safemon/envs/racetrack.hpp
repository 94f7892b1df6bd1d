#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "safemon/envs/car.hpp"
#include "safemon/envs/scenario.hpp"

namespace safemon::envs {

/// 13 x 13 cells of 3 m centred on the ego vehicle, axis aligned.
/// Cell (i, j) has centre (ego_x + 3 (i - 6), ego_y + 3 (j - 6)).
using Grid = std::array<std::array<std::uint8_t, 13>, 13>;

struct Vehicle {
  double x = 0.0;
  double y = 0.0;
  double speed = 7.0;
  double cruise_speed = 7.0;
  int lane = 0;
};

/// Straight two-lane road along +x; lane 0 spans y in [0, 5], lane 1 [5, 10].
struct RacetrackWorld {
  double lane_width = 5.0;
  std::size_t slots = 5;          // obstacle columns in the trace
  double clearance = 5.4;         // collision threshold c
  double follow_gap = 8.0;        // obstacles match the leader's speed inside this gap
  double sentinel = -1000.0;      // position of empty obstacle slots
  CarParams car{12.0, 2.5, 0.4, 0.1};
  CarState ego{0.0, 2.5, 12.0, 0.0};
  std::vector<Vehicle> obstacles;
  Grid occupancy{};
  Grid on_road{};

  [[nodiscard]] double lane_center(int lane) const { return lane_width * (lane + 0.5); }
  /// Smallest ego-obstacle distance.
  [[nodiscard]] double nearest_distance() const;
  /// ego state followed by `slots` (x, y) pairs; empty slots hold the sentinel.
  [[nodiscard]] std::vector<double> state_row() const;
  void update_grids();
};

/// Ego in lane 0 at the origin; `n` obstacles ahead at seeded positions,
/// lanes and cruise speeds in [5, 9] m/s.
RacetrackWorld racetrack_init(std::size_t n, std::uint64_t seed);

/// Advances ego by car_step and obstacles by lane keeping with a follow rule;
/// `rng` adds small lateral wander to obstacles. Grids are recomputed.
void racetrack_step(RacetrackWorld& world, double steering, std::mt19937_64& rng);

/// Lane-keep-and-overtake rule driven by the grids: when a cell ahead in the
/// ego lane is occupied and the other lane is clear, move over with a lateral
/// offset that keeps the passing separation above the collision threshold.
struct LaneController {
  double lateral_gain = 0.08;
  double heading_gain = 0.9;
  double look_ahead = 18.0;
  double pass_offset = 6.1;  // lateral separation targeted when passing

  [[nodiscard]] double steer(const RacetrackWorld& world);

  int target_lane = 0;
};

/// Rollout until the first step with nearest distance at most the clearance or
/// until max_steps states. Trace columns: x, y, v, theta, then obs_i_x, obs_i_y.
Episode simulate_racetrack(const OodScenario& scenario, std::uint64_t seed, std::size_t max_steps,
                           LaneController controller = {});

}  // namespace safemon::envs
