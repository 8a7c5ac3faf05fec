#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "wpp/signal.hpp"

namespace wpp {

/// A nonnegative scalar function J approximating the distance to the data
/// manifold, together with its input gradient. Implementations are immutable
/// and safe to evaluate from several threads.
class DistanceEstimator {
 public:
  virtual ~DistanceEstimator() = default;

  virtual std::size_t input_dim() const = 0;
  virtual double value(std::span<const double> u) const = 0;
  /// J(u) and grad J(u) for every row; `grads` may be null when only values are needed.
  virtual void evaluate(const SampleSet& batch, std::vector<double>& values, SampleSet* grads) const = 0;

  Signal gradient(std::span<const double> u) const;
};

}  // namespace wpp
