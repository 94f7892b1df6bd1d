#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "safemon/envs/car.hpp"
#include "safemon/envs/scenario.hpp"
#include "safemon/stl/collision.hpp"

namespace safemon::envs {

/// Square loop corridor: outer square [0, side]^2 minus the inner square
/// [width, side - width]^2. The car travels clockwise.
struct HallwayWorld {
  double side = 20.0;
  double width = 1.5;
  std::vector<stl::Segment> walls;
  std::size_t rays = 21;
  double fov_min_deg = -135.0;
  double fov_max_deg = 135.0;
  double lidar_range = 5.0;
  double clearance = 0.3;  // collision threshold c
  CarParams car;

  static HallwayWorld standard();
  [[nodiscard]] bool inside(double x, double y) const;
  /// Relative angle of ray i in radians.
  [[nodiscard]] double ray_angle(std::size_t i) const;
  /// Distance from (x, y) to the nearest wall.
  [[nodiscard]] double wall_distance(double x, double y) const;
};

/// Distance along the ray from `origin` at absolute `angle` to the first wall,
/// clipped to `range`.
double cast_ray(stl::Point origin, double angle, const std::vector<stl::Segment>& walls,
                double range);

/// Exact ray-cast ranges ordered by ray angle. Throws ParameterError when the
/// car is outside the corridor.
std::vector<double> lidar_scan(const CarState& car, const HallwayWorld& world);

/// Applies a LIDAR corruption. Throws ParameterError for non-LIDAR scenarios
/// other than None.
std::vector<double> apply_ood(std::vector<double> scan, const OodScenario& scenario,
                              std::mt19937_64& rng, double range = 5.0);

/// Follow-the-gap steering on a scan: widen obstacles by taking the minimum
/// over neighbouring rays, head for the deepest forward ray, and add a
/// side-balancing term.
struct FollowGapController {
  double gap_gain = 0.9;
  double centering_gain = 0.6;
  /// Neighbouring rays on each side folded into the widened minimum.
  std::size_t widen = 1;
  std::size_t first_forward_ray = 4;
  std::size_t last_forward_ray = 16;
  std::size_t left_ray = 17;
  std::size_t right_ray = 3;

  [[nodiscard]] double steer(const std::vector<double>& scan, const HallwayWorld& world) const;
};

struct HallwayStart {
  double x = 10.0;
  double y = 19.25;
  double theta = 0.0;
};

/// Starts spread along the four straight sections with lateral and heading
/// offsets; `count` points are taken in a fixed order.
std::vector<HallwayStart> hallway_start_grid(const HallwayWorld& world, std::size_t count);

/// Rollout until the first step whose wall clearance is at most world.clearance
/// or until max_steps states have been recorded. The seed drives small start
/// jitter and LIDAR noise. Trace columns are x, y, v, theta with theta
/// unwrapped for continuity.
Episode simulate_hallway(const HallwayWorld& world, const FollowGapController& controller,
                         const OodScenario& scenario, std::uint64_t seed, std::size_t max_steps,
                         const HallwayStart& start);

}  // namespace safemon::envs
