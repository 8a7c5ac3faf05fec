#include "wpp/rng.hpp"

#include <cmath>
#include <numbers>

#include "wpp/errors.hpp"

namespace wpp {
namespace {

std::uint64_t splitmix64(std::uint64_t& x) noexcept {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t x = seed;
  for (auto& s : s_) s = splitmix64(x);
}

std::uint64_t Rng::next_u64() noexcept {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform01() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::size_t Rng::index(std::size_t n) noexcept {
  // Lemire's multiply-shift; bias is negligible for the sizes used here.
  const unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
  return static_cast<std::size_t>(m >> 64);
}

double Rng::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

Rng Rng::derive(std::uint64_t stream) const noexcept {
  std::uint64_t x = seed_ ^ (0xd1b54a32d192ed03ULL * (stream + 1));
  return Rng(splitmix64(x));
}

Tensor rng_normal(Rng& rng, std::size_t n, double mean, double stddev) {
  if (!(stddev >= 0.0)) throw ContractError("rng_normal: stddev must be >= 0");
  Tensor t({n});
  for (std::size_t i = 0; i < n; ++i) t[i] = rng.normal(mean, stddev);
  return t;
}

Tensor rng_uniform(Rng& rng, std::size_t n, double lo, double hi) {
  if (!(lo <= hi)) throw ContractError("rng_uniform: lo must be <= hi");
  Tensor t({n});
  for (std::size_t i = 0; i < n; ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

}  // namespace wpp
