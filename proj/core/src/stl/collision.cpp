#include "safemon/stl/collision.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "safemon/error.hpp"

namespace safemon::stl {

double distance(Point p, Point q) {
  const double dx = p.x - q.x;
  const double dy = p.y - q.y;
  return std::sqrt(dx * dx + dy * dy);
}

double distance(Point p, const Segment& s) {
  const double ex = s.b.x - s.a.x;
  const double ey = s.b.y - s.a.y;
  const double len2 = ex * ex + ey * ey;
  double u = 0.0;
  if (len2 > 0.0) u = std::clamp(((p.x - s.a.x) * ex + (p.y - s.a.y) * ey) / len2, 0.0, 1.0);
  return distance(p, Point{s.a.x + u * ex, s.a.y + u * ey});
}

namespace {

template <class Obstacle>
double min_clearance(std::span<const Point> positions, std::span<const Obstacle> obstacles,
                     double c) {
  if (positions.empty()) throw EmptyInputError("collision_robustness: no positions");
  if (obstacles.empty()) throw EmptyInputError("collision_robustness: no obstacles");
  double best = std::numeric_limits<double>::infinity();
  for (const Point& p : positions) {
    for (const auto& o : obstacles) best = std::min(best, distance(p, o));
  }
  return best - c;
}

}  // namespace

double collision_robustness(std::span<const Point> positions, std::span<const Point> obstacles,
                            double c) {
  return min_clearance(positions, obstacles, c);
}

double collision_robustness(std::span<const Point> positions, std::span<const Segment> walls,
                            double c) {
  return min_clearance(positions, walls, c);
}

}  // namespace safemon::stl
