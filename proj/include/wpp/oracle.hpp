#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <utility>
#include <variant>

#include "wpp/estimator.hpp"
#include "wpp/rng.hpp"
#include "wpp/signal.hpp"

namespace wpp::oracle {

/// Upper half of the circle |u - center| = radius in the plane (u_2 >= center_2).
struct HalfCircle {
  Signal center;
  double radius = 1.0;
};

/// Closed ball |u - center| <= radius.
struct Ball {
  Signal center;
  double radius = 1.0;
};

/// {u : <normal, u> <= offset} with a unit normal.
struct HalfSpace {
  Signal normal;
  double offset = 0.0;
};

struct Segment {
  Signal a;
  Signal b;
};

/// Finite set of points.
struct PointCloud {
  SampleSet samples;
};

using AnalyticManifold = std::variant<HalfCircle, Ball, HalfSpace, Segment, PointCloud>;

// Validating constructors; throw ConfigError on radius <= 0, non-unit normal, empty cloud, or bad dimensions.
AnalyticManifold make_half_circle(Signal center, double radius);
AnalyticManifold make_ball(Signal center, double radius);
AnalyticManifold make_half_space(Signal normal, double offset);
AnalyticManifold make_segment(Signal a, Signal b);
AnalyticManifold make_point_cloud(SampleSet samples);

std::size_t manifold_dim(const AnalyticManifold& m);
bool is_convex(const AnalyticManifold& m);
const char* kind_name(const AnalyticManifold& m);

/// Nearest point of m to u. For the half circle: radial projection when it lands
/// on the upper half, otherwise the nearer arc endpoint (ties go to the endpoint
/// with the smaller first coordinate). Throws DegenerateInputError at the circle
/// center and ShapeError on dimension mismatch.
Signal project_analytic(const AnalyticManifold& m, std::span<const double> u);
double distance_analytic(const AnalyticManifold& m, std::span<const double> u);

/// Nearest sample to u, ties broken by lowest index. Throws ContractError on an empty set.
std::pair<std::size_t, Signal> brute_force_project(const SampleSet& samples, std::span<const double> u);

/// n points exactly on m: uniform in angle (half circle), arc length (segment),
/// volume (ball); half-space samples are Gaussian points moved onto the set;
/// point clouds are resampled with replacement.
SampleSet sample_manifold(const AnalyticManifold& m, std::size_t n, Rng& rng);

/// `count` equally spaced arc points from angle 0 to pi inclusive.
SampleSet discretize_half_circle(const HalfCircle& c, std::size_t count);

/// The exact distance function of m as a DistanceEstimator: grad d = (u - P(u)) / d(u)
/// off the manifold and 0 on it (distances up to 1e-12 count as on it).
class ExactDistance final : public DistanceEstimator {
 public:
  explicit ExactDistance(AnalyticManifold m);
  const AnalyticManifold& manifold() const noexcept { return m_; }

  std::size_t input_dim() const override;
  double value(std::span<const double> u) const override;
  void evaluate(const SampleSet& batch, std::vector<double>& values, SampleSet* grads) const override;

 private:
  AnalyticManifold m_;
};

std::shared_ptr<const DistanceEstimator> exact_distance_stage(const AnalyticManifold& m);

}  // namespace wpp::oracle
