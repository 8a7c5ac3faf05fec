#pragma once

#include <cstddef>
#include <cstdint>

#include "wpp/tensor.hpp"

namespace wpp {

/// xoshiro256** generator seeded through splitmix64.
///
/// The stream depends only on the seed; floating-point variates are derived
/// with explicit formulas (no std:: distributions) so runs reproduce across
/// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next_u64() noexcept;
  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform01() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform01(); }
  /// Uniform integer in [0, n); n must be positive.
  std::size_t index(std::size_t n) noexcept;
  /// Standard normal via Box-Muller; caches the paired variate.
  double normal() noexcept;
  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

  /// Independent generator for a sub-stream (e.g. one per phantom).
  Rng derive(std::uint64_t stream) const noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// n i.i.d. N(mean, stddev^2) values; stddev must be >= 0.
Tensor rng_normal(Rng& rng, std::size_t n, double mean, double stddev);
/// n i.i.d. U[lo, hi) values; lo must be <= hi.
Tensor rng_uniform(Rng& rng, std::size_t n, double lo, double hi);

}  // namespace wpp
