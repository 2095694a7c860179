#include "ionflux/ad/num_array.hpp"

#include <algorithm>
#include <cmath>

namespace ionflux::ad {

NumArray::NumArray(std::size_t rows, std::size_t cols, double fill)
    : rank_(2), rows_(rows), cols_(cols), data_(rows * cols, fill) {}

NumArray::NumArray(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rank_(2), rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("NumArray: shape " + shape_string() + " does not match " +
                     std::to_string(data_.size()) + " values");
  }
}

NumArray::NumArray(std::vector<double> vec)
    : rank_(1), rows_(1), cols_(vec.size()), data_(std::move(vec)) {}

NumArray NumArray::from_shape(std::span<const std::size_t> shape, std::vector<double> data) {
  if (shape.size() == 1) {
    if (data.size() != shape[0]) throw ShapeError("NumArray: rank-1 shape/data mismatch");
    return NumArray(std::move(data));
  }
  if (shape.size() == 2) return NumArray(shape[0], shape[1], std::move(data));
  throw ShapeError("NumArray: only rank 1 and 2 are supported, got rank " +
                   std::to_string(shape.size()));
}

NumArray NumArray::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  std::size_t r = rows.size();
  std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("NumArray::matrix: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return NumArray(r, c, std::move(data));
}

NumArray NumArray::column(std::vector<double> vec) {
  std::size_t n = vec.size();
  return NumArray(n, 1, std::move(vec));
}

std::vector<std::size_t> NumArray::shape() const {
  if (rank_ == 1) return {cols_};
  return {rows_, cols_};
}

bool NumArray::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

NumArray NumArray::reshaped(std::size_t rows, std::size_t cols) const {
  if (rows * cols != data_.size()) {
    throw ShapeError("reshape: cannot view " + shape_string() + " as [" +
                     std::to_string(rows) + "," + std::to_string(cols) + "]");
  }
  return NumArray(rows, cols, data_);
}

void NumArray::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::string NumArray::shape_string() const {
  if (rank_ == 1) return "[" + std::to_string(cols_) + "]";
  return "[" + std::to_string(rows_) + "," + std::to_string(cols_) + "]";
}

}  // namespace ionflux::ad
