#include "safemon/envs/scenario.hpp"

#include <charconv>
#include <cstdio>

#include "safemon/error.hpp"

namespace safemon::envs {

OodScenario OodScenario::none() { return {}; }

OodScenario OodScenario::drop_rays(std::size_t k, std::size_t n_rays) {
  OodScenario s;
  s.kind = Kind::DropRays;
  s.count = k;
  s.ray_indices = evenly_spaced_rays(k, n_rays);
  return s;
}

OodScenario OodScenario::lidar_noise(double bound) {
  if (!(bound >= 0.0)) throw ParameterError("noise bound must be nonnegative");
  OodScenario s;
  s.kind = Kind::LidarNoise;
  s.noise_bound = bound;
  return s;
}

OodScenario OodScenario::obstacles(std::size_t n) {
  OodScenario s;
  s.kind = Kind::ExtraObstacles;
  s.count = n;
  return s;
}

OodScenario OodScenario::cartpole(double gravity, double pole_length, double pole_mass) {
  if (!(gravity > 0.0 && pole_length > 0.0 && pole_mass > 0.0)) {
    throw ParameterError("cartpole parameters must be positive");
  }
  OodScenario s;
  s.kind = Kind::CartpoleParams;
  s.gravity = gravity;
  s.pole_length = pole_length;
  s.pole_mass = pole_mass;
  return s;
}

std::vector<std::size_t> evenly_spaced_rays(std::size_t k, std::size_t n_rays) {
  if (k == 0) return {};
  if (k > n_rays) throw ParameterError("cannot drop more rays than the scan has");
  const std::size_t step = std::max<std::size_t>(1, (n_rays - 1) / (k + 1));
  const std::size_t start = (n_rays - 1 - (k - 1) * step) / 2;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(start + i * step);
  return out;
}

namespace {

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

double parse_real(const std::string& text, const std::string& name) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || p != text.data() + text.size()) {
    throw ConfigError("scenario", "cannot parse scenario name '" + name + "'");
  }
  return v;
}

}  // namespace

std::string OodScenario::name() const {
  switch (kind) {
    case Kind::None: return "none";
    case Kind::DropRays: return "drop_rays_" + std::to_string(count);
    case Kind::LidarNoise: return "lidar_noise_" + format_real(noise_bound);
    case Kind::ExtraObstacles: return "obstacles_" + std::to_string(count);
    case Kind::CartpoleParams:
      return "cartpole_g" + format_real(gravity) + "_l" + format_real(pole_length) + "_m" +
             format_real(pole_mass);
  }
  return "none";
}

OodScenario OodScenario::from_name(const std::string& name) {
  auto starts = [&](const std::string& p) { return name.rfind(p, 0) == 0; };
  if (name == "none") return none();
  if (starts("drop_rays_")) {
    return drop_rays(static_cast<std::size_t>(parse_real(name.substr(10), name)));
  }
  if (starts("lidar_noise_")) return lidar_noise(parse_real(name.substr(12), name));
  if (starts("obstacles_")) {
    return obstacles(static_cast<std::size_t>(parse_real(name.substr(10), name)));
  }
  if (starts("cartpole_g")) {
    const auto l = name.find("_l");
    const auto m = name.find("_m");
    if (l == std::string::npos || m == std::string::npos || m < l) {
      throw ConfigError("scenario", "cannot parse scenario name '" + name + "'");
    }
    return cartpole(parse_real(name.substr(10, l - 10), name),
                    parse_real(name.substr(l + 2, m - l - 2), name),
                    parse_real(name.substr(m + 2), name));
  }
  throw ConfigError("scenario", "unknown scenario '" + name + "'");
}

}  // namespace safemon::envs
