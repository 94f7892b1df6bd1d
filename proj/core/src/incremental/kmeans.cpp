#include "safemon/incremental/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "safemon/error.hpp"

namespace safemon::incremental {

namespace {

double sq_dist(const Point& a, const Point& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::vector<Point> seed_centers(const std::vector<Point>& points, std::size_t k,
                                std::mt19937_64& rng) {
  std::vector<Point> centers;
  std::uniform_int_distribution<std::size_t> first(0, points.size() - 1);
  centers.push_back(points[first(rng)]);
  std::vector<double> d2(points.size(), std::numeric_limits<double>::infinity());
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      d2[i] = std::min(d2[i], sq_dist(points[i], centers.back()));
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      pick = points.size() - 1;
      for (std::size_t i = 0; i < points.size(); ++i) {
        if (d2[i] <= 0.0) continue;
        r -= d2[i];
        if (r <= 0.0) {
          pick = i;
          break;
        }
      }
      while (d2[pick] <= 0.0) --pick;  // never re-pick an existing center
    }
    centers.push_back(points[pick]);
  }
  return centers;
}

double assign(const std::vector<Point>& points, const std::vector<Point>& centers,
              std::vector<std::size_t>& assignments) {
  double inertia = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::size_t best = 0;
    double best_d = sq_dist(points[i], centers[0]);
    for (std::size_t c = 1; c < centers.size(); ++c) {
      const double d = sq_dist(points[i], centers[c]);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    assignments[i] = best;
    inertia += best_d;
  }
  return inertia;
}

}  // namespace

KMeansResult kmeans(const std::vector<Point>& points, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw ParameterError("kmeans needs k >= 1");
  if (points.size() < k) {
    throw EmptyInputError("kmeans needs at least k=" + std::to_string(k) + " points, got " +
                          std::to_string(points.size()));
  }
  const std::size_t dim = points.front().size();
  for (const auto& p : points) {
    if (p.size() != dim) throw ShapeError("kmeans points differ in dimension");
  }
  std::mt19937_64 rng(seed);
  KMeansResult r;
  r.centers = seed_centers(points, k, rng);
  r.assignments.assign(points.size(), 0);
  std::vector<std::size_t> previous;
  for (r.iterations = 1; r.iterations <= 100; ++r.iterations) {
    r.inertia = assign(points, r.centers, r.assignments);
    r.inertia_history.push_back(r.inertia);
    if (r.assignments == previous) break;
    previous = r.assignments;

    std::vector<Point> sums(k, Point(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      auto& s = sums[r.assignments[i]];
      for (std::size_t j = 0; j < dim; ++j) s[j] += points[i][j];
      ++counts[r.assignments[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t j = 0; j < dim; ++j) r.centers[c][j] = sums[c][j] / static_cast<double>(counts[c]);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < points.size(); ++i) {
        const double d = sq_dist(points[i], r.centers[r.assignments[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      r.centers[c] = points[far];
      --counts[r.assignments[far]];
      r.assignments[far] = c;
      counts[c] = 1;
    }
  }
  r.iterations = std::min<std::size_t>(r.iterations, 100);
  return r;
}

std::size_t elbow_index(const std::vector<std::size_t>& ks, const std::vector<double>& inertia) {
  if (ks.empty() || ks.size() != inertia.size()) {
    throw ParameterError("elbow needs one inertia value per candidate k");
  }
  const std::size_t n = ks.size();
  if (n <= 2) return 0;
  const double k0 = static_cast<double>(ks.front());
  const double kspan = static_cast<double>(ks.back()) - k0;
  const auto [lo, hi] = std::minmax_element(inertia.begin(), inertia.end());
  const double ispan = *hi - *lo;
  if (kspan <= 0.0 || ispan <= 0.0) return 0;
  auto nx = [&](std::size_t i) { return (static_cast<double>(ks[i]) - k0) / kspan; };
  auto ny = [&](std::size_t i) { return (inertia[i] - *lo) / ispan; };
  const double dx = nx(n - 1) - nx(0);
  const double dy = ny(n - 1) - ny(0);
  const double len = std::hypot(dx, dy);
  std::size_t best = 0;
  double best_d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = std::fabs(dx * (ny(0) - ny(i)) - dy * (nx(0) - nx(i))) / len;
    if (d > best_d + 1e-9) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::size_t elbow_select_k(const std::vector<Point>& points, const std::vector<std::size_t>& k_range,
                           std::uint64_t seed) {
  if (k_range.empty()) throw ParameterError("elbow_select_k needs candidate values of k");
  std::vector<std::size_t> ks = k_range;
  std::sort(ks.begin(), ks.end());
  std::vector<double> inertia;
  for (std::size_t k : ks) inertia.push_back(kmeans(points, k, seed).inertia);
  return ks[elbow_index(ks, inertia)];
}

std::vector<std::size_t> admit_clusters(const std::vector<std::size_t>& assignments,
                                        const std::vector<bool>& membership,
                                        double ratio_threshold) {
  if (assignments.size() != membership.size()) {
    throw ShapeError("one membership flag per assignment is required");
  }
  if (!(ratio_threshold >= 0.0 && ratio_threshold <= 1.0)) {
    throw ParameterError("ratio threshold must lie in [0,1]");
  }
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> tally;  // id -> (flagged, total)
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    auto& t = tally[assignments[i]];
    t.first += membership[i] ? 1 : 0;
    ++t.second;
  }
  std::vector<std::size_t> admitted;
  for (const auto& [id, t] : tally) {
    if (static_cast<double>(t.first) >= ratio_threshold * static_cast<double>(t.second)) {
      admitted.push_back(id);
    }
  }
  return admitted;
}

}  // namespace safemon::incremental
