#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ionflux::ad {

/// Thrown when operand shapes do not conform to an operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a NaN or Inf enters or leaves a computation.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major array of doubles, rank 1 or 2.
///
/// Rank-1 arrays of length n behave as 1 x n rows wherever an operation
/// needs a matrix view.
class NumArray {
 public:
  NumArray() = default;
  NumArray(std::size_t rows, std::size_t cols, double fill = 0.0);
  NumArray(std::size_t rows, std::size_t cols, std::vector<double> data);
  explicit NumArray(std::vector<double> vec);  // rank 1
  NumArray(std::initializer_list<double> vec) : NumArray(std::vector<double>(vec)) {}

  static NumArray from_shape(std::span<const std::size_t> shape,
                             std::vector<double> data);
  static NumArray matrix(std::initializer_list<std::initializer_list<double>> rows);
  static NumArray column(std::vector<double> vec);

  std::vector<std::size_t> shape() const;
  std::size_t rank() const { return rank_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& vec() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool all_finite() const;
  bool same_shape(const NumArray& other) const {
    return rank_ == other.rank_ && rows_ == other.rows_ && cols_ == other.cols_;
  }
  NumArray reshaped(std::size_t rows, std::size_t cols) const;
  void fill(double v);

  std::string shape_string() const;

  friend bool operator==(const NumArray& a, const NumArray& b) {
    return a.same_shape(b) && a.data_ == b.data_;
  }

 private:
  std::size_t rank_ = 2;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

}  // namespace ionflux::ad
