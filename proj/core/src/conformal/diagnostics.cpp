#include "safemon/conformal/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "safemon/error.hpp"

namespace safemon::conformal {

double tv_distance_estimate(std::span<const double> a, std::span<const double> b,
                            std::size_t bins) {
  if (a.empty() || b.empty()) throw EmptyInputError("tv_distance_estimate needs two samples");
  if (bins < 2) throw ParameterError("tv_distance_estimate needs at least two bins");
  const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
  const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
  const double lo = std::min(*amin, *bmin);
  const double hi = std::max(*amax, *bmax);
  const double width = (hi - lo) / static_cast<double>(bins);

  const auto histogram = [&](std::span<const double> xs) {
    std::vector<double> mass(bins, 0.0);
    for (double x : xs) {
      std::size_t i = 0;
      if (width > 0.0) {
        i = static_cast<std::size_t>(std::floor((x - lo) / width));
        i = std::min(i, bins - 1);
      }
      mass[i] += 1.0;
    }
    for (double& m : mass) m /= static_cast<double>(xs.size());
    return mass;
  };
  const auto p = histogram(a);
  const auto q = histogram(b);
  double tv = 0.0;
  for (std::size_t i = 0; i < bins; ++i) tv += std::fabs(p[i] - q[i]);
  return std::clamp(0.5 * tv, 0.0, 1.0);
}

double scott_bandwidth(std::size_t n, std::size_t d) {
  if (n == 0) throw EmptyInputError("scott_bandwidth needs a nonempty sample");
  return std::pow(static_cast<double>(n), -1.0 / (static_cast<double>(d) + 4.0));
}

namespace {

struct Normalizer {
  std::vector<double> mean;
  std::vector<double> scale;
};

Normalizer fit(const std::vector<std::vector<double>>& reference) {
  const std::size_t d = reference.front().size();
  Normalizer z{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
  const double n = static_cast<double>(reference.size());
  for (const auto& r : reference) {
    if (r.size() != d) throw ShapeError("kde reference vectors differ in dimension");
    for (std::size_t j = 0; j < d; ++j) z.mean[j] += r[j] / n;
  }
  for (std::size_t j = 0; j < d; ++j) {
    double var = 0.0;
    for (const auto& r : reference) var += (r[j] - z.mean[j]) * (r[j] - z.mean[j]);
    var /= n;
    if (var >= 1e-12) z.scale[j] = std::sqrt(var);
  }
  return z;
}

double log_density(const std::vector<std::vector<double>>& reference, const Normalizer& z,
                   std::span<const double> query, double bandwidth) {
  const std::size_t d = z.mean.size();
  if (query.size() != d) throw ShapeError("kde query dimension differs from reference");
  const double h2 = bandwidth * bandwidth;
  const double log_norm =
      -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi * h2);
  std::vector<double> qn(d);
  for (std::size_t j = 0; j < d; ++j) qn[j] = (query[j] - z.mean[j]) / z.scale[j];

  std::vector<double> terms;
  terms.reserve(reference.size());
  for (const auto& r : reference) {
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = qn[j] - (r[j] - z.mean[j]) / z.scale[j];
      sq += diff * diff;
    }
    terms.push_back(-0.5 * sq / h2);
  }
  const double peak = *std::max_element(terms.begin(), terms.end());
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - peak);
  return log_norm + peak + std::log(sum / static_cast<double>(reference.size()));
}

void validate(const std::vector<std::vector<double>>& reference, double bandwidth) {
  if (reference.empty()) throw EmptyInputError("kde reference set is empty");
  if (!(bandwidth > 0.0)) throw ParameterError("kde bandwidth must be positive");
}

}  // namespace

double kde_log_likelihood(const std::vector<std::vector<double>>& reference,
                          std::span<const double> query, double bandwidth) {
  validate(reference, bandwidth);
  return log_density(reference, fit(reference), query, bandwidth);
}

std::vector<double> kde_log_likelihood(const std::vector<std::vector<double>>& reference,
                                       const std::vector<std::vector<double>>& queries,
                                       double bandwidth) {
  validate(reference, bandwidth);
  const Normalizer z = fit(reference);
  std::vector<double> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back(log_density(reference, z, q, bandwidth));
  return out;
}

std::vector<double> kde_density_1d(std::span<const double> sample, std::span<const double> grid,
                                   double bandwidth) {
  if (sample.empty()) throw EmptyInputError("kde sample is empty");
  if (!(bandwidth > 0.0)) throw ParameterError("kde bandwidth must be positive");
  const double norm =
      1.0 / (static_cast<double>(sample.size()) * bandwidth * std::sqrt(2.0 * std::numbers::pi));
  std::vector<double> out;
  out.reserve(grid.size());
  for (double g : grid) {
    double acc = 0.0;
    for (double x : sample) {
      const double u = (g - x) / bandwidth;
      acc += std::exp(-0.5 * u * u);
    }
    out.push_back(acc * norm);
  }
  return out;
}

}  // namespace safemon::conformal
