#pragma once

#include <span>

namespace safemon::stl {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct Segment {
  Point a;
  Point b;
};

/// Euclidean distance, computed as sqrt(dx*dx + dy*dy) so that it matches the
/// `dist` predicate bit for bit.
double distance(Point p, Point q);

/// Distance from `p` to the closed segment `s`.
double distance(Point p, const Segment& s);

/// min over time of (min over obstacles of distance) - c.
/// Throws EmptyInputError when positions or obstacles are empty.
double collision_robustness(std::span<const Point> positions, std::span<const Point> obstacles,
                            double c);

/// Same quantity against wall segments instead of points.
double collision_robustness(std::span<const Point> positions, std::span<const Segment> walls,
                            double c);

}  // namespace safemon::stl
