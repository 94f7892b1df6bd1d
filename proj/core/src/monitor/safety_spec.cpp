#include "safemon/monitor/safety_spec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "safemon/error.hpp"
#include "safemon/stl/robustness.hpp"
#include "safemon/stl/trace.hpp"

namespace safemon::monitor {

SafetySpec SafetySpec::from_formula(stl::Formula formula) {
  SafetySpec s;
  s.kind = Kind::Formula;
  s.formula = std::move(formula);
  return s;
}

SafetySpec SafetySpec::wall_collision(std::vector<stl::Segment> walls, double clearance) {
  SafetySpec s;
  s.walls = std::move(walls);
  s.clearance = clearance;
  return s;
}

SafetySpec SafetySpec::agent_collision(std::vector<std::pair<std::size_t, std::size_t>> agent_dims,
                                       double clearance) {
  SafetySpec s;
  s.agent_dims = std::move(agent_dims);
  s.clearance = clearance;
  return s;
}

void SafetySpec::validate(std::size_t window_rows, std::size_t state_dim) const {
  if (kind == Kind::Formula) {
    if (!formula) throw ParameterError("formula safety spec without a formula");
    if (stl::required_horizon(*formula) + 1 > window_rows) {
      throw HorizonError("safety formula looks further ahead than the prediction horizon");
    }
    return;
  }
  if (!(clearance > 0.0)) throw ParameterError("collision clearance must be positive");
  if (walls.empty() && static_obstacles.empty() && agent_dims.empty()) {
    throw ParameterError("collision spec has no obstacles");
  }
  const auto check = [&](std::pair<std::size_t, std::size_t> d) {
    if (d.first >= state_dim || d.second >= state_dim) {
      throw IndexError("collision spec position dimension outside the state");
    }
  };
  check(ego_dims);
  for (const auto& d : agent_dims) check(d);
}

double SafetySpec::robustness(const predictor::Matrix& window) const {
  if (window.rows == 0) throw EmptyInputError("robustness of an empty window");
  if (kind == Kind::Formula) {
    stl::Trace trace(window.cols);
    for (std::size_t r = 0; r < window.rows; ++r) trace.push_back(window.row(r));
    return stl::robustness(*formula, trace, 0);
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < window.rows; ++r) {
    const stl::Point ego{window(r, ego_dims.first), window(r, ego_dims.second)};
    for (const auto& w : walls) best = std::min(best, stl::distance(ego, w));
    for (const auto& p : static_obstacles) best = std::min(best, stl::distance(ego, p));
    for (const auto& [ix, iy] : agent_dims) {
      best = std::min(best, stl::distance(ego, stl::Point{window(r, ix), window(r, iy)}));
    }
  }
  return best - clearance;
}

}  // namespace safemon::monitor
