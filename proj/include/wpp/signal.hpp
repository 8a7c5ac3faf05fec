#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "wpp/tensor.hpp"

namespace wpp {

/// A point of the signal space: a dense real vector (images are stored row-major).
using Signal = std::vector<double>;

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
double distance(std::span<const double> a, std::span<const double> b);
/// out = a + s * b
Signal axpy(std::span<const double> a, double s, std::span<const double> b);

/// Ordered, fixed-dimension collection of signals stored contiguously (n x dim, row-major).
class SampleSet {
 public:
  SampleSet() = default;
  explicit SampleSet(std::size_t dim) : dim_(dim) {}
  SampleSet(std::size_t count, std::size_t dim) : dim_(dim), data_(count * dim, 0.0) {}
  static SampleSet from_rows(const std::vector<Signal>& rows);
  /// Throws ShapeError unless `t` is a rank-2 tensor.
  static SampleSet from_tensor(const Tensor& t);

  std::size_t size() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
  std::size_t dim() const noexcept { return dim_; }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }
  Signal signal(std::size_t i) const;
  void push_back(std::span<const double> s);

  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

  /// The rows as an (n x dim) tensor.
  Tensor to_tensor() const;
  /// Rows selected by index, in the given order.
  SampleSet gather(std::span<const std::size_t> indices) const;

  friend bool operator==(const SampleSet&, const SampleSet&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

}  // namespace wpp
