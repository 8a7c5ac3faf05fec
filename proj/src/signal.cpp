#include "wpp/signal.hpp"

#include <cmath>
#include <string>

#include "wpp/errors.hpp"

namespace wpp {

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

Signal axpy(std::span<const double> a, double s, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("axpy: dimension mismatch");
  Signal out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + s * b[i];
  return out;
}

SampleSet SampleSet::from_rows(const std::vector<Signal>& rows) {
  if (rows.empty()) return {};
  SampleSet set(rows.front().size());
  for (const auto& r : rows) set.push_back(r);
  return set;
}

SampleSet SampleSet::from_tensor(const Tensor& t) {
  if (t.rank() != 2) throw ShapeError("SampleSet::from_tensor expects rank 2, got " + shape_string(t.shape()));
  SampleSet set(t.dim(1));
  set.data_ = t.storage();
  return set;
}

Signal SampleSet::signal(std::size_t i) const {
  auto r = row(i);
  return Signal(r.begin(), r.end());
}

void SampleSet::push_back(std::span<const double> s) {
  if (dim_ == 0 && data_.empty()) dim_ = s.size();
  if (s.size() != dim_) {
    throw ShapeError("SampleSet: signal of dimension " + std::to_string(s.size()) +
                     " added to set of dimension " + std::to_string(dim_));
  }
  data_.insert(data_.end(), s.begin(), s.end());
}

Tensor SampleSet::to_tensor() const { return Tensor({size(), dim_}, data_); }

SampleSet SampleSet::gather(std::span<const std::size_t> indices) const {
  SampleSet out(dim_);
  out.data_.reserve(indices.size() * dim_);
  for (std::size_t i : indices) out.push_back(row(i));
  return out;
}

}  // namespace wpp
