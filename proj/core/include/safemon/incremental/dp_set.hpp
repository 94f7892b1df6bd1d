#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "safemon/incremental/kmeans.hpp"
#include "safemon/predictor/predictor.hpp"

namespace safemon::incremental {

/// Diagonal Gaussian summary of one cluster of window features.
struct Prototype {
  std::vector<double> center;
  std::vector<double> scale;  // floored at 1e-6
  std::size_t member_count = 0;
  std::string label;

  /// Mean and standard deviation of `members`.
  static Prototype fit(const std::vector<Point>& members, std::string label);

  /// Diagonal-Gaussian log-density of `x` using the first x.size() dimensions.
  [[nodiscard]] double log_likelihood(std::span<const double> x) const;

  friend bool operator==(const Prototype&, const Prototype&) = default;
};

struct DpEntry {
  Prototype prototype;
  predictor::Predictor predictor;

  friend bool operator==(const DpEntry&, const DpEntry&) = default;
};

/// Ordered (prototype, predictor) pairs; entry 0 is the in-distribution base.
/// All predictors share the base's feature normalisation.
class DistributionPredictorSet {
 public:
  DistributionPredictorSet() = default;
  /// Base entry whose prototype is fitted on the features of `training`.
  DistributionPredictorSet(predictor::Predictor base, const std::vector<predictor::Window>& training);
  DistributionPredictorSet(Prototype base_prototype, predictor::Predictor base);

  void append(Prototype prototype, predictor::Predictor predictor);

  [[nodiscard]] std::size_t size() const { return entries_.size(); }
  [[nodiscard]] const DpEntry& operator[](std::size_t i) const { return entries_.at(i); }
  [[nodiscard]] const std::vector<DpEntry>& entries() const { return entries_; }
  [[nodiscard]] const predictor::Predictor& base() const { return entries_.at(0).predictor; }

  /// Index of the entry whose prototype gives `history` the highest
  /// likelihood; ties go to the lowest index.
  [[nodiscard]] std::size_t select(const predictor::Matrix& history) const;

  /// Writes manifest.json plus one predictor file per entry into `dir`.
  void save(const std::filesystem::path& dir) const;
  static DistributionPredictorSet load(const std::filesystem::path& dir);

  friend bool operator==(const DistributionPredictorSet&, const DistributionPredictorSet&) = default;

 private:
  std::vector<DpEntry> entries_;
};

/// (predictor, label) chosen for `history`.
std::pair<const predictor::Predictor*, std::string> select_predictor(
    const DistributionPredictorSet& dp, const predictor::Matrix& history);

struct IncrementalConfig {
  std::size_t k_min = 1;
  std::size_t k_max = 6;
  double ratio_threshold = 0.7;
  /// Cap on in-distribution windows mixed into clustering; 0 means as many as W.
  std::size_t max_reference_points = 0;
  std::uint64_t seed = 0;
  predictor::TrainConfig fine_tune;
};

struct UpdateResult {
  DistributionPredictorSet dp;
  std::size_t k = 0;
  /// Admitted clusters that received at least one routed W window.
  std::vector<std::size_t> admitted;
  /// True when no cluster passed admission; dp is then unchanged.
  bool no_cluster_admitted = false;
};

/// Clusters the high-error windows `W` together with a sample of
/// in-distribution `reference` windows and admits clusters dominated by W.
/// Each W window is then routed by history likelihood across the existing
/// entries and the admitted prototypes, and every admitted prototype that
/// receives windows gets a predictor fine-tuned on them. Existing entries are
/// copied untouched.
UpdateResult incremental_update(const DistributionPredictorSet& dp,
                                const std::vector<predictor::Window>& W,
                                const std::vector<bool>& W_crash,
                                const std::vector<predictor::Window>& reference,
                                const predictor::Predictor& base, const IncrementalConfig& cfg);

}  // namespace safemon::incremental
