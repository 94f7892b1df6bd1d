#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "safemon/stl/trace.hpp"

namespace safemon::envs {

/// Distribution-shift setting applied to a simulation.
struct OodScenario {
  enum class Kind { None, DropRays, LidarNoise, ExtraObstacles, CartpoleParams };

  Kind kind = Kind::None;
  /// Rays zeroed (DropRays) or vehicles on the road (ExtraObstacles).
  std::size_t count = 0;
  /// Upper bound of the additive uniform range noise (LidarNoise).
  double noise_bound = 0.0;
  /// Zeroed ray indices; filled with evenly spaced indices by drop_rays().
  std::vector<std::size_t> ray_indices;
  double gravity = 9.8;
  double pole_length = 0.5;
  double pole_mass = 0.1;

  static OodScenario none();
  static OodScenario drop_rays(std::size_t k, std::size_t n_rays = 21);
  static OodScenario lidar_noise(double bound);
  static OodScenario obstacles(std::size_t n);
  static OodScenario cartpole(double gravity, double pole_length, double pole_mass);

  /// Short stable identifier, e.g. "drop_rays_3" or "obstacles_4".
  [[nodiscard]] std::string name() const;
  /// Inverse of name(); throws ConfigError on unknown names.
  static OodScenario from_name(const std::string& name);
  [[nodiscard]] bool is_lidar() const { return kind == Kind::DropRays || kind == Kind::LidarNoise; }

  friend bool operator==(const OodScenario&, const OodScenario&) = default;
};

/// k indices spaced floor((n-1)/(k+1)) apart and centred on the middle ray.
std::vector<std::size_t> evenly_spaced_rays(std::size_t k, std::size_t n_rays);

/// One simulated rollout.
struct Episode {
  std::string study;
  stl::Trace trace{1};
  std::optional<std::size_t> violation_time;
  OodScenario scenario;
  std::uint64_t seed = 0;
  /// Controller observations per step (LIDAR scan or flattened grids).
  std::vector<std::vector<double>> observations;

  friend bool operator==(const Episode&, const Episode&) = default;
};

}  // namespace safemon::envs
