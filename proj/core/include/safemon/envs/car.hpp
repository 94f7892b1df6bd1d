#pragma once

#include <array>

namespace safemon::envs {

/// [x, y, v, theta]
using CarState = std::array<double, 4>;

struct CarParams {
  double speed = 2.5;
  double wheelbase = 0.33;
  double max_steer = 0.4;
  double dt = 0.1;
};

/// Kinematic bicycle step at constant speed, integrated exactly along the arc
/// for the held steering angle. The heading is wrapped to (-pi, pi].
/// Throws ParameterError when |steering| exceeds params.max_steer.
CarState car_step(const CarState& state, double steering, const CarParams& params);

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

}  // namespace safemon::envs
