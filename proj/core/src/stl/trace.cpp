#include "safemon/stl/trace.hpp"

#include "safemon/error.hpp"

namespace safemon::stl {

Trace::Trace(std::size_t dim, double dt, std::vector<std::string> labels)
    : dim_(dim), dt_(dt), labels_(std::move(labels)) {
  if (dim_ == 0) throw ShapeError("trace dimension must be at least 1");
  if (!labels_.empty() && labels_.size() != dim_) {
    throw ShapeError("trace labels must match the state dimension");
  }
}

Trace Trace::from_rows(const std::vector<std::vector<double>>& rows, double dt) {
  if (rows.empty()) throw EmptyInputError("trace needs at least one state");
  Trace trace(rows.front().size(), dt);
  for (const auto& row : rows) trace.push_back(row);
  return trace;
}

void Trace::push_back(std::span<const double> state) {
  if (state.size() != dim_) {
    throw ShapeError("state of dimension " + std::to_string(state.size()) +
                     " pushed to trace of dimension " + std::to_string(dim_));
  }
  data_.insert(data_.end(), state.begin(), state.end());
}

Trace Trace::slice(std::size_t begin, std::size_t count) const {
  if (begin + count > length()) throw ShapeError("trace slice out of range");
  Trace out(dim_, dt_, labels_);
  out.data_.assign(data_.begin() + static_cast<std::ptrdiff_t>(begin * dim_),
                   data_.begin() + static_cast<std::ptrdiff_t>((begin + count) * dim_));
  return out;
}

}  // namespace safemon::stl
