#include "safemon/envs/racetrack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "safemon/error.hpp"

namespace safemon::envs {

double RacetrackWorld::nearest_distance() const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& o : obstacles) {
    const double dx = ego[0] - o.x;
    const double dy = ego[1] - o.y;
    best = std::min(best, std::sqrt(dx * dx + dy * dy));
  }
  return best;
}

std::vector<double> RacetrackWorld::state_row() const {
  std::vector<double> row{ego[0], ego[1], ego[2], ego[3]};
  for (std::size_t i = 0; i < slots; ++i) {
    if (i < obstacles.size()) {
      row.push_back(obstacles[i].x);
      row.push_back(obstacles[i].y);
    } else {
      row.push_back(sentinel);
      row.push_back(sentinel);
    }
  }
  return row;
}

void RacetrackWorld::update_grids() {
  for (auto& col : occupancy) col.fill(0);
  for (std::size_t i = 0; i < 13; ++i) {
    for (std::size_t j = 0; j < 13; ++j) {
      const double cy = ego[1] + 3.0 * (static_cast<double>(j) - 6.0);
      on_road[i][j] = (cy >= 0.0 && cy <= 2.0 * lane_width) ? 1 : 0;
    }
  }
  for (const auto& o : obstacles) {
    const double fi = std::floor((o.x - ego[0]) / 3.0 + 6.5);
    const double fj = std::floor((o.y - ego[1]) / 3.0 + 6.5);
    if (fi < 0.0 || fi > 12.0 || fj < 0.0 || fj > 12.0) continue;
    occupancy[static_cast<std::size_t>(fi)][static_cast<std::size_t>(fj)] = 1;
  }
}

RacetrackWorld racetrack_init(std::size_t n, std::uint64_t seed) {
  RacetrackWorld w;
  if (n > w.slots) throw ParameterError("at most five obstacles fit the trace layout");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> speed(5.0, 9.0);
  std::uniform_real_distribution<double> ahead(25.0, 110.0);
  std::uniform_int_distribution<int> lane(0, 1);
  for (std::size_t i = 0; i < n; ++i) {
    Vehicle v;
    for (int attempt = 0; attempt < 100; ++attempt) {
      v.lane = lane(rng);
      v.x = ahead(rng);
      const bool clash = std::any_of(w.obstacles.begin(), w.obstacles.end(), [&](const Vehicle& o) {
        return o.lane == v.lane && std::fabs(o.x - v.x) < 12.0;
      });
      if (!clash) break;
    }
    v.y = w.lane_center(v.lane);
    v.cruise_speed = speed(rng);
    v.speed = v.cruise_speed;
    w.obstacles.push_back(v);
  }
  w.update_grids();
  return w;
}

void racetrack_step(RacetrackWorld& w, double steering, std::mt19937_64& rng) {
  std::normal_distribution<double> wander(0.0, 0.02);
  const double dt = w.car.dt;
  // Speeds are decided from the current snapshot, then everyone moves.
  std::vector<double> speeds;
  for (const auto& o : w.obstacles) {
    double s = o.cruise_speed;
    for (const auto& lead : w.obstacles) {
      if (&lead == &o || lead.lane != o.lane) continue;
      const double gap = lead.x - o.x;
      if (gap > 0.0 && gap < w.follow_gap) s = std::min(s, lead.speed);
    }
    speeds.push_back(s);
  }
  for (std::size_t i = 0; i < w.obstacles.size(); ++i) {
    auto& o = w.obstacles[i];
    o.speed = speeds[i];
    o.x += o.speed * dt;
    o.y += 0.5 * (w.lane_center(o.lane) - o.y) + wander(rng);
  }
  w.ego = car_step(w.ego, steering, w.car);
  w.update_grids();
}

double LaneController::steer(const RacetrackWorld& w) {
  const int ego_lane = w.ego[1] < w.lane_width ? 0 : 1;
  const int other = 1 - target_lane;
  // Cells whose centre lies within the lane band of `lane`, ahead of (or level
  // with) the ego within the look-ahead distance.
  auto lane_blocked = [&](int lane, double behind, double ahead) {
    for (std::size_t i = 0; i < 13; ++i) {
      const double dx = 3.0 * (static_cast<double>(i) - 6.0);
      if (dx < -behind || dx > ahead) continue;
      for (std::size_t j = 0; j < 13; ++j) {
        if (!w.occupancy[i][j]) continue;
        const double cy = w.ego[1] + 3.0 * (static_cast<double>(j) - 6.0);
        const int cell_lane = cy < w.lane_width ? 0 : 1;
        if (cell_lane == lane) return true;
      }
    }
    return false;
  };
  (void)ego_lane;
  if (lane_blocked(target_lane, 0.0, look_ahead) && !lane_blocked(other, 9.0, look_ahead)) {
    target_lane = other;
  }
  // Passing offset: sit toward the far edge of the target lane while the other
  // lane is occupied near the ego, otherwise ride the lane centre.
  double target_y = w.lane_center(target_lane);
  if (lane_blocked(1 - target_lane, 9.0, 9.0)) {
    const double other_center = w.lane_center(1 - target_lane);
    target_y = other_center + (target_lane == 1 ? pass_offset : -pass_offset);
  }
  const double cmd = lateral_gain * (target_y - w.ego[1]) - heading_gain * w.ego[3];
  return std::clamp(cmd, -w.car.max_steer, w.car.max_steer);
}

Episode simulate_racetrack(const OodScenario& scenario, std::uint64_t seed, std::size_t max_steps,
                           LaneController controller) {
  std::size_t n = 1;
  if (scenario.kind == OodScenario::Kind::ExtraObstacles) {
    n = scenario.count;
  } else if (scenario.kind != OodScenario::Kind::None) {
    throw ParameterError("racetrack runs only accept obstacle-count scenarios");
  }
  RacetrackWorld w = racetrack_init(n, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  Episode ep;
  ep.study = "racetrack";
  ep.scenario = scenario;
  ep.seed = seed;
  std::vector<std::string> labels{"x", "y", "v", "theta"};
  for (std::size_t i = 0; i < w.slots; ++i) {
    labels.push_back("obs_" + std::to_string(i) + "_x");
    labels.push_back("obs_" + std::to_string(i) + "_y");
  }
  ep.trace = stl::Trace(4 + 2 * w.slots, w.car.dt, labels);
  for (std::size_t t = 0; t < max_steps; ++t) {
    ep.trace.push_back(w.state_row());
    if (w.nearest_distance() - w.clearance <= 0.0) {
      ep.violation_time = t;
      break;
    }
    if (t + 1 == max_steps) break;
    const double steer = controller.steer(w);
    std::vector<double> obs;
    for (const auto& col : w.occupancy) obs.insert(obs.end(), col.begin(), col.end());
    for (const auto& col : w.on_road) obs.insert(obs.end(), col.begin(), col.end());
    ep.observations.push_back(std::move(obs));
    racetrack_step(w, steer, rng);
  }
  return ep;
}

}  // namespace safemon::envs
