#include "safemon/envs/cartpole.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "safemon/conformal/diagnostics.hpp"
#include "safemon/error.hpp"
#include "safemon/stl/parser.hpp"
#include "safemon/stl/robustness.hpp"

namespace safemon::envs {

void CartpoleParams::validate() const {
  const bool ok = gravity > 0.0 && pole_length > 0.0 && pole_mass > 0.0 && cart_mass > 0.0 &&
                  force_magnitude > 0.0 && dt > 0.0 && angle_limit_deg > 0.0 &&
                  position_limit > 0.0 && episode_cap > 0;
  if (!ok) throw ParameterError("cartpole parameters must be positive");
}

CartpoleParams CartpoleParams::from_scenario(const OodScenario& scenario) {
  CartpoleParams p;
  if (scenario.kind == OodScenario::Kind::CartpoleParams) {
    p.gravity = scenario.gravity;
    p.pole_length = scenario.pole_length;
    p.pole_mass = scenario.pole_mass;
  } else if (scenario.kind != OodScenario::Kind::None) {
    throw ParameterError("cartpole runs only accept parameter scenarios");
  }
  p.validate();
  return p;
}

CartpoleState cartpole_step_force(const CartpoleState& s, double force, const CartpoleParams& p) {
  const double total = p.cart_mass + p.pole_mass;
  const double pml = p.pole_mass * p.pole_length;
  const double cos_t = std::cos(s[2]);
  const double sin_t = std::sin(s[2]);
  const double temp = (force + pml * s[3] * s[3] * sin_t) / total;
  const double theta_acc = (p.gravity * sin_t - cos_t * temp) /
                           (p.pole_length * (4.0 / 3.0 - p.pole_mass * cos_t * cos_t / total));
  const double x_acc = temp - pml * theta_acc * cos_t / total;
  // Velocities first, then positions from the new velocities.
  CartpoleState n = s;
  n[1] = s[1] + p.dt * x_acc;
  n[0] = s[0] + p.dt * n[1];
  n[3] = s[3] + p.dt * theta_acc;
  n[2] = s[2] + p.dt * n[3];
  return n;
}

CartpoleState cartpole_step(const CartpoleState& s, bool push_right, const CartpoleParams& p) {
  return cartpole_step_force(s, push_right ? p.force_magnitude : -p.force_magnitude, p);
}

double cartpole_energy(const CartpoleState& s, const CartpoleParams& p) {
  const double l = p.pole_length;
  const double m = p.pole_mass;
  // Pole centre of mass at height l cos(theta); rod inertia about its centre m l^2 / 3.
  const double vx = s[1] + l * s[3] * std::cos(s[2]);
  const double vy = -l * s[3] * std::sin(s[2]);
  const double kinetic = 0.5 * p.cart_mass * s[1] * s[1] + 0.5 * m * (vx * vx + vy * vy) +
                         0.5 * (m * l * l / 3.0) * s[3] * s[3];
  return kinetic + m * p.gravity * l * std::cos(s[2]);
}

bool LinearController::push_right(const CartpoleState& s) const {
  double u = 0.0;
  for (std::size_t i = 0; i < 4; ++i) u += gains[i] * s[i];
  return u > 0.0;
}

namespace {

bool unsafe(const CartpoleState& s, const CartpoleParams& p) {
  const double angle_deg = std::fabs(s[2]) * 180.0 / std::numbers::pi;
  return !(p.angle_limit_deg - angle_deg > 0.0 && p.position_limit - std::fabs(s[0]) > 0.0);
}

CartpoleState random_start(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  CartpoleState s{};
  for (double& v : s) v = u(rng);
  return s;
}

std::size_t survival(const LinearController& c, const CartpoleParams& p, std::uint64_t seed,
                     std::size_t horizon) {
  std::mt19937_64 rng(seed);
  CartpoleState s = random_start(rng);
  for (std::size_t t = 0; t < horizon; ++t) {
    if (unsafe(s, p)) return t;
    s = cartpole_step(s, c.push_right(s), p);
  }
  return horizon;
}

}  // namespace

LinearController tune_cartpole_controller(std::uint64_t seed, std::size_t iterations,
                                          std::size_t rollouts, std::size_t horizon) {
  const CartpoleParams p;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto score = [&](const LinearController& c) {
    double total = 0.0;
    for (std::size_t r = 0; r < rollouts; ++r) {
      total += static_cast<double>(survival(c, p, seed * 7919 + r, horizon));
    }
    return total / static_cast<double>(rollouts);
  };
  LinearController best;
  best.gains = {0.1, 0.5, 10.0, 1.0};
  double best_score = score(best);
  double step = 1.0;
  for (std::size_t i = 0; i < iterations; ++i) {
    LinearController cand = best;
    for (std::size_t j = 0; j < 4; ++j) cand.gains[j] += step * gauss(rng) * (1.0 + std::fabs(best.gains[j]));
    const double sc = score(cand);
    if (sc > best_score) {
      best = cand;
      best_score = sc;
    }
    if (best_score >= static_cast<double>(horizon)) step *= 0.9;
  }
  return best;
}

std::string cartpole_formula_text(const CartpoleParams& p) {
  char buf[192];
  std::snprintf(buf, sizeof buf,
                "G[0,%zu] ((%.17g - abs(s[2]) * %.17g > 0) & (%.17g - abs(s[0]) > 0))",
                p.episode_cap - 1, p.angle_limit_deg, 180.0 / std::numbers::pi, p.position_limit);
  return buf;
}

Episode simulate_cartpole(const OodScenario& scenario, const LinearController& controller,
                          std::uint64_t seed) {
  const CartpoleParams p = CartpoleParams::from_scenario(scenario);
  std::mt19937_64 rng(seed);
  Episode ep;
  ep.study = "cartpole";
  ep.scenario = scenario;
  ep.seed = seed;
  ep.trace = stl::Trace(4, p.dt, {"x", "x_dot", "theta", "theta_dot"});
  CartpoleState s = random_start(rng);
  for (std::size_t t = 0; t < p.episode_cap; ++t) {
    ep.trace.push_back(s);
    if (!ep.violation_time && unsafe(s, p)) ep.violation_time = t;
    ep.observations.push_back({s.begin(), s.end()});
    s = cartpole_step(s, controller.push_right(s), p);
  }
  return ep;
}

std::size_t cartpole_reward(const Episode& episode) {
  return episode.violation_time.value_or(episode.trace.length());
}

std::vector<SweepCell> cartpole_sweep(const SweepGrid& grid, const LinearController& controller,
                                      std::size_t n_runs, std::uint64_t seed,
                                      std::size_t reference_runs) {
  if (grid.gravity.empty() && grid.pole_length.empty() && grid.pole_mass.empty()) {
    throw EmptyInputError("cartpole sweep grid is empty");
  }
  if (n_runs == 0 || reference_runs == 0) throw ParameterError("cartpole sweep needs at least one run per cell");
  const CartpoleParams nominal;
  const stl::Formula phi = stl::parse_formula(cartpole_formula_text(nominal), 4);

  std::mt19937_64 seeder(seed);
  std::vector<std::uint64_t> reference_seeds(reference_runs);
  std::vector<std::uint64_t> query_seeds(n_runs);
  for (auto& s : reference_seeds) s = seeder();
  for (auto& s : query_seeds) s = seeder();

  const auto flatten = [](const Episode& ep) { return ep.trace.data(); };
  std::vector<std::vector<double>> reference;
  for (auto s : reference_seeds) {
    reference.push_back(flatten(simulate_cartpole(OodScenario::none(), controller, s)));
  }
  const double bandwidth = conformal::scott_bandwidth(reference.size(), reference.front().size());

  std::vector<SweepCell> cells;
  const auto run_cell = [&](const std::string& name, double value, const OodScenario& sc) {
    SweepCell cell;
    cell.param_name = name;
    cell.param_value = value;
    cell.nominal = sc.gravity == nominal.gravity && sc.pole_length == nominal.pole_length &&
                   sc.pole_mass == nominal.pole_mass;
    std::vector<std::vector<double>> queries;
    for (auto s : query_seeds) {
      const Episode ep = simulate_cartpole(sc, controller, s);
      cell.mean_reward += static_cast<double>(cartpole_reward(ep));
      cell.mean_robustness += stl::robustness(phi, ep.trace, 0);
      queries.push_back(flatten(ep));
    }
    for (double ll : conformal::kde_log_likelihood(reference, queries, bandwidth)) {
      cell.mean_loglik += ll;
    }
    const double n = static_cast<double>(n_runs);
    cell.mean_reward /= n;
    cell.mean_robustness /= n;
    cell.mean_loglik /= n;
    cells.push_back(cell);
  };
  for (double g : grid.gravity) {
    run_cell("gravity", g, OodScenario::cartpole(g, nominal.pole_length, nominal.pole_mass));
  }
  for (double l : grid.pole_length) {
    run_cell("pole_length", l, OodScenario::cartpole(nominal.gravity, l, nominal.pole_mass));
  }
  for (double m : grid.pole_mass) {
    run_cell("pole_mass", m, OodScenario::cartpole(nominal.gravity, nominal.pole_length, m));
  }
  return cells;
}

}  // namespace safemon::envs
