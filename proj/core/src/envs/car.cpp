#include "safemon/envs/car.hpp"

#include <cmath>
#include <numbers>

#include "safemon/error.hpp"

namespace safemon::envs {

double wrap_angle(double a) {
  constexpr double pi = std::numbers::pi;
  if (a > -pi && a <= pi) return a;  // keeps in-range headings bit-exact
  a = std::fmod(a + pi, 2.0 * pi);
  if (a <= 0.0) a += 2.0 * pi;
  return a - pi;
}

CarState car_step(const CarState& s, double steering, const CarParams& p) {
  if (std::fabs(steering) > p.max_steer + 1e-12) {
    throw ParameterError("steering angle exceeds the configured maximum");
  }
  const double v = p.speed;
  const double omega = v * std::tan(steering) / p.wheelbase;
  const double th = s[3];
  CarState n{};
  if (std::fabs(omega) < 1e-12) {
    n[0] = s[0] + v * std::cos(th) * p.dt;
    n[1] = s[1] + v * std::sin(th) * p.dt;
    n[3] = th;
  } else {
    const double th2 = th + omega * p.dt;
    n[0] = s[0] + v / omega * (std::sin(th2) - std::sin(th));
    n[1] = s[1] - v / omega * (std::cos(th2) - std::cos(th));
    n[3] = th2;
  }
  n[2] = v;
  n[3] = wrap_angle(n[3]);
  return n;
}

}  // namespace safemon::envs
