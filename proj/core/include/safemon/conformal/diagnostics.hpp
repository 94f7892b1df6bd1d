#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace safemon::conformal {

/// Total-variation distance between two samples estimated from equal-width
/// histograms over the pooled range [min(a u b), max(a u b)].
double tv_distance_estimate(std::span<const double> a, std::span<const double> b,
                            std::size_t bins = 50);

/// Scott's rule factor n^(-1/(d+4)).
double scott_bandwidth(std::size_t n, std::size_t d);

/// Log of the mean isotropic Gaussian kernel density at `query`.
///
/// Reference and query vectors are first z-scored per dimension using the
/// reference mean and standard deviation; dimensions whose reference variance
/// is below 1e-12 are centred but not rescaled.
double kde_log_likelihood(const std::vector<std::vector<double>>& reference,
                          std::span<const double> query, double bandwidth);

/// Same as above for many queries sharing one reference set.
std::vector<double> kde_log_likelihood(const std::vector<std::vector<double>>& reference,
                                       const std::vector<std::vector<double>>& queries,
                                       double bandwidth);

/// One-dimensional Gaussian KDE density on `grid` (raw units, no normalisation).
std::vector<double> kde_density_1d(std::span<const double> sample, std::span<const double> grid,
                                   double bandwidth);

}  // namespace safemon::conformal
