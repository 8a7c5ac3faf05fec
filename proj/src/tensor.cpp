#include "wpp/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "wpp/errors.hpp"

namespace wpp {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::size_t shape_product(const Tensor::Shape& shape) noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

std::string shape_string(const Tensor::Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), values_(shape_product(shape_), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (shape_product(shape_) != values_.size()) {
    throw ShapeError("tensor shape " + shape_string(shape_) + " does not match " +
                     std::to_string(values_.size()) + " values");
  }
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::filled(Shape shape, double v) {
  Tensor t(std::move(shape));
  std::fill(t.values_.begin(), t.values_.end(), v);
  return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) throw ShapeError("axis out of range for " + shape_string(shape_));
  return shape_[axis];
}

double Tensor::item() const {
  if (values_.size() != 1) throw ContractError("item() on non-scalar tensor " + shape_string(shape_));
  return values_[0];
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_product(shape) != values_.size()) {
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), values_);
}

Tensor& Tensor::operator+=(const Tensor& other) {
  if (values_.size() != other.values_.size()) {
    throw ShapeError("+= between " + shape_string(shape_) + " and " + shape_string(other.shape_));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

Tensor& Tensor::operator*=(double s) noexcept {
  for (double& v : values_) v *= s;
  return *this;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || (b.rank() != 2 && b.rank() != 1)) {
    throw ShapeError("matmul expects matrices, got " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1);
  const std::size_t kb = b.dim(0);
  const std::size_t n = b.rank() == 2 ? b.dim(1) : 1;
  if (k != kb) {
    throw ShapeError("matmul inner dimensions differ: " + shape_string(a.shape()) + " * " +
                     shape_string(b.shape()));
  }
  Tensor out(b.rank() == 2 ? Tensor::Shape{m, n} : Tensor::Shape{m});
  Eigen::Map<const RowMatrix> am(a.data(), m, k);
  Eigen::Map<const RowMatrix> bm(b.data(), k, n);
  Eigen::Map<RowMatrix> om(out.data(), m, n);
  om.noalias() = am * bm;
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose expects a matrix, got " + shape_string(a.shape()));
  const std::size_t m = a.dim(0), n = a.dim(1);
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

double frobenius_norm(const Tensor& a) noexcept {
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  return std::sqrt(s);
}

}  // namespace wpp
