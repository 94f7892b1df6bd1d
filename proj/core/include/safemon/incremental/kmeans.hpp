#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace safemon::incremental {

using Point = std::vector<double>;

struct KMeansResult {
  std::vector<Point> centers;
  std::vector<std::size_t> assignments;
  double inertia = 0.0;
  std::size_t iterations = 0;
  /// Inertia after each assignment step.
  std::vector<double> inertia_history;
};

/// Lloyd's algorithm with k-means++ seeding; stops at an assignment fixed
/// point or after 100 iterations. Empty clusters are re-seeded with the point
/// farthest from its current center. Throws ParameterError when k == 0 and
/// EmptyInputError when there are fewer than k points.
KMeansResult kmeans(const std::vector<Point>& points, std::size_t k, std::uint64_t seed);

/// Index of the geometric elbow: the point farthest from the chord joining the
/// first and last (k, inertia) pairs after scaling both axes to [0, 1]. Ties go
/// to the smallest k.
std::size_t elbow_index(const std::vector<std::size_t>& ks, const std::vector<double>& inertia);

/// Runs kmeans for every k in `k_range` and returns the elbow k.
std::size_t elbow_select_k(const std::vector<Point>& points, const std::vector<std::size_t>& k_range,
                           std::uint64_t seed);

/// Cluster ids whose fraction of members flagged in `membership` is at least
/// `ratio_threshold`. Clusters without members are never admitted.
std::vector<std::size_t> admit_clusters(const std::vector<std::size_t>& assignments,
                                        const std::vector<bool>& membership,
                                        double ratio_threshold);

}  // namespace safemon::incremental
