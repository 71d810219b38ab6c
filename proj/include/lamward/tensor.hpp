#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lamward/rng.hpp"

namespace lamward {

/// Dense row-major matrix of doubles. Vectors are 1 x n, scalars 1 x 1.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor(1, 1, v); }
  static Tensor row_vector(std::vector<double> v);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  std::vector<std::size_t> shape() const { return {rows_, cols_}; }
  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  /// Copy of rows [begin, begin + count).
  Tensor rows_slice(std::size_t begin, std::size_t count) const;
  Tensor row_copy(std::size_t r) const { return rows_slice(r, 1); }

  double item() const;
  bool all_finite() const;
  void fill(double v);

  bool operator==(const Tensor& o) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

std::string shape_str(const Tensor& t);
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);
/// Throws NumericError naming `what` if any entry is NaN/Inf.
void require_finite(const Tensor& t, const char* what);

Tensor vstack(std::span<const Tensor> parts);

double l1_mean_distance(std::span<const double> a, std::span<const double> b);
double l2_distance(std::span<const double> a, std::span<const double> b);

enum class Dist { uniform, normal };

/// Fills a rows x cols tensor from `rng` in row-major order.
Tensor rng_draw(Rng& rng, Dist dist, std::size_t rows, std::size_t cols);

}  // namespace lamward
