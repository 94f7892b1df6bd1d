#include "safemon/envs/hallway.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "safemon/error.hpp"

namespace safemon::envs {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

}  // namespace

HallwayWorld HallwayWorld::standard() {
  HallwayWorld w;
  const double s = w.side;
  const double lo = w.width;
  const double hi = s - w.width;
  auto square = [&](double a, double b) {
    w.walls.push_back({{a, a}, {b, a}});
    w.walls.push_back({{b, a}, {b, b}});
    w.walls.push_back({{b, b}, {a, b}});
    w.walls.push_back({{a, b}, {a, a}});
  };
  square(0.0, s);
  square(lo, hi);
  return w;
}

bool HallwayWorld::inside(double x, double y) const {
  const double lo = width;
  const double hi = side - width;
  const bool in_outer = x >= 0.0 && x <= side && y >= 0.0 && y <= side;
  const bool in_inner = x > lo && x < hi && y > lo && y < hi;
  return in_outer && !in_inner;
}

double HallwayWorld::ray_angle(std::size_t i) const {
  const double step = rays > 1 ? (fov_max_deg - fov_min_deg) / static_cast<double>(rays - 1) : 0.0;
  return (fov_min_deg + step * static_cast<double>(i)) * kDeg;
}

double HallwayWorld::wall_distance(double x, double y) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : walls) best = std::min(best, stl::distance(stl::Point{x, y}, s));
  return best;
}

double cast_ray(stl::Point o, double angle, const std::vector<stl::Segment>& walls, double range) {
  const double dx = std::cos(angle);
  const double dy = std::sin(angle);
  double best = range;
  for (const auto& s : walls) {
    const double ex = s.b.x - s.a.x;
    const double ey = s.b.y - s.a.y;
    const double den = dx * ey - dy * ex;
    if (std::fabs(den) < 1e-15) continue;
    const double wx = s.a.x - o.x;
    const double wy = s.a.y - o.y;
    const double t = (wx * ey - wy * ex) / den;
    const double u = (wx * dy - wy * dx) / den;
    if (t >= 0.0 && u >= 0.0 && u <= 1.0) best = std::min(best, t);
  }
  return best;
}

std::vector<double> lidar_scan(const CarState& car, const HallwayWorld& world) {
  if (!world.inside(car[0], car[1])) throw ParameterError("car is outside the corridor");
  std::vector<double> out(world.rays);
  for (std::size_t i = 0; i < world.rays; ++i) {
    out[i] = cast_ray({car[0], car[1]}, car[3] + world.ray_angle(i), world.walls, world.lidar_range);
  }
  return out;
}

std::vector<double> apply_ood(std::vector<double> scan, const OodScenario& scenario,
                              std::mt19937_64& rng, double range) {
  switch (scenario.kind) {
    case OodScenario::Kind::None:
      return scan;
    case OodScenario::Kind::DropRays:
      for (std::size_t i : scenario.ray_indices) {
        if (i >= scan.size()) throw ParameterError("dropped ray index out of range");
        scan[i] = 0.0;
      }
      return scan;
    case OodScenario::Kind::LidarNoise: {
      std::uniform_real_distribution<double> u(0.0, scenario.noise_bound);
      for (double& r : scan) r = std::clamp(r + (scenario.noise_bound > 0.0 ? u(rng) : 0.0), 0.0, range);
      return scan;
    }
    default:
      throw ParameterError("scenario '" + scenario.name() + "' does not act on LIDAR scans");
  }
}

double FollowGapController::steer(const std::vector<double>& scan, const HallwayWorld& world) const {
  const std::size_t n = scan.size();
  std::vector<double> widened(n);
  for (std::size_t i = 0; i < n; ++i) {
    double m = scan[i];
    for (std::size_t k = 1; k <= widen; ++k) {
      if (i >= k) m = std::min(m, scan[i - k]);
      if (i + k < n) m = std::min(m, scan[i + k]);
    }
    widened[i] = m;
  }
  const std::size_t centre = n / 2;
  std::size_t best = centre;
  for (std::size_t i = first_forward_ray; i <= last_forward_ray && i < n; ++i) {
    const auto dist_c = [&](std::size_t j) { return j > centre ? j - centre : centre - j; };
    if (widened[i] > widened[best] || (widened[i] == widened[best] && dist_c(i) < dist_c(best))) {
      best = i;
    }
  }
  double cmd = gap_gain * world.ray_angle(best) + centering_gain * (scan[left_ray] - scan[right_ray]);
  return std::clamp(cmd, -world.car.max_steer, world.car.max_steer);
}

std::vector<HallwayStart> hallway_start_grid(const HallwayWorld& world, std::size_t count) {
  const double mid = world.width / 2.0;
  const double far = world.side - mid;
  const double pi = std::numbers::pi;
  std::vector<HallwayStart> out;
  const double along[] = {5.0, 10.0, 15.0, 7.5, 12.5};
  const double lateral[] = {0.0, 0.15, -0.15};
  const double heading[] = {0.0, 0.08, -0.08};
  for (double dth : heading) {
    for (double lat : lateral) {
      for (double a : along) {
        // Clockwise: top heading +x, right heading -y, bottom heading -x, left heading +y.
        out.push_back({a, far + lat, 0.0 + dth});
        out.push_back({far + lat, world.side - a, -pi / 2 + dth});
        out.push_back({world.side - a, mid + lat, pi + dth});
        out.push_back({mid + lat, a, pi / 2 + dth});
      }
    }
  }
  std::vector<HallwayStart> picked;
  for (std::size_t i = 0; i < count; ++i) picked.push_back(out[i % out.size()]);
  return picked;
}

Episode simulate_hallway(const HallwayWorld& world, const FollowGapController& controller,
                         const OodScenario& scenario, std::uint64_t seed, std::size_t max_steps,
                         const HallwayStart& start) {
  if (scenario.kind != OodScenario::Kind::None && !scenario.is_lidar()) {
    throw ParameterError("hallway runs only accept LIDAR scenarios");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  CarState s{start.x, start.y, world.car.speed, start.theta};
  // Lateral jitter is applied in the direction normal to the heading.
  const double lat = 0.05 * jitter(rng);
  s[0] += -std::sin(start.theta) * lat;
  s[1] += std::cos(start.theta) * lat;
  s[3] = wrap_angle(s[3] + 0.02 * jitter(rng));

  Episode ep;
  ep.study = "hallway";
  ep.scenario = scenario;
  ep.seed = seed;
  ep.trace = stl::Trace(4, world.car.dt, {"x", "y", "v", "theta"});
  double unwrapped = s[3];
  for (std::size_t t = 0; t < max_steps; ++t) {
    const std::array<double, 4> row{s[0], s[1], s[2], unwrapped};
    ep.trace.push_back(row);
    if (world.wall_distance(s[0], s[1]) - world.clearance <= 0.0) {
      ep.violation_time = t;
      break;
    }
    if (t + 1 == max_steps) break;
    auto scan = apply_ood(lidar_scan(s, world), scenario, rng, world.lidar_range);
    const double steer = controller.steer(scan, world);
    ep.observations.push_back(std::move(scan));
    const double before = s[3];
    s = car_step(s, steer, world.car);
    unwrapped += wrap_angle(s[3] - before);
  }
  return ep;
}

}  // namespace safemon::envs
