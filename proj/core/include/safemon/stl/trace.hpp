#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace safemon::stl {

/// Discrete-time signal: T state vectors of a fixed dimension, stored row-major.
class Trace {
 public:
  explicit Trace(std::size_t dim, double dt = 1.0, std::vector<std::string> labels = {});

  /// Builds a trace from nested rows; all rows must share one nonzero dimension.
  static Trace from_rows(const std::vector<std::vector<double>>& rows, double dt = 1.0);

  void push_back(std::span<const double> state);

  [[nodiscard]] std::span<const double> operator[](std::size_t t) const {
    return {data_.data() + t * dim_, dim_};
  }
  [[nodiscard]] std::span<double> mutable_state(std::size_t t) {
    return {data_.data() + t * dim_, dim_};
  }

  [[nodiscard]] std::size_t length() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] double dt() const noexcept { return dt_; }
  [[nodiscard]] const std::vector<std::string>& labels() const noexcept { return labels_; }
  [[nodiscard]] const std::vector<double>& data() const noexcept { return data_; }

  /// Copy of rows [begin, begin + count).
  [[nodiscard]] Trace slice(std::size_t begin, std::size_t count) const;

  friend bool operator==(const Trace&, const Trace&) = default;

 private:
  std::size_t dim_;
  double dt_;
  std::vector<std::string> labels_;
  std::vector<double> data_;
};

}  // namespace safemon::stl
