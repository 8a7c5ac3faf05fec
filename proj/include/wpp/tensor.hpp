#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace wpp {

/// Dense row-major array of doubles with an explicit shape.
///
/// Tensors are plain values: copying duplicates storage, and a const Tensor
/// may be shared freely across threads.
class Tensor {
 public:
  using Shape = std::vector<std::size_t>;

  Tensor() = default;
  /// Zero-filled tensor of the given shape.
  explicit Tensor(Shape shape);
  /// Throws ShapeError when the value count does not match the shape.
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor filled(Shape shape, double v);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return values_.size(); }
  bool is_scalar() const noexcept { return values_.size() == 1; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  const std::vector<double>& storage() const noexcept { return values_; }
  std::vector<double>& storage() noexcept { return values_; }
  const double* data() const noexcept { return values_.data(); }
  double* data() noexcept { return values_.data(); }

  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double& operator[](std::size_t i) noexcept { return values_[i]; }
  /// Row-major 2D access.
  double at(std::size_t r, std::size_t c) const { return values_[r * shape_.at(1) + c]; }
  double& at(std::size_t r, std::size_t c) { return values_[r * shape_.at(1) + c]; }
  /// Value of a one-element tensor; throws ContractError otherwise.
  double item() const;

  bool all_finite() const noexcept;
  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
  Tensor reshaped(Shape shape) const;

  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(double s) noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

std::size_t shape_product(const Tensor::Shape& shape) noexcept;
std::string shape_string(const Tensor::Shape& shape);

/// Standard matrix product of rank-2 tensors (a: m x k, b: k x n).
/// Rank-1 right operands are treated as column vectors and yield rank-1 results.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

/// Frobenius norm of all values.
double frobenius_norm(const Tensor& a) noexcept;

}  // namespace wpp
