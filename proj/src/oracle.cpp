#include "wpp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "wpp/errors.hpp"

namespace wpp::oracle {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_dim(const AnalyticManifold& m, std::span<const double> u) {
  if (u.size() != manifold_dim(m)) {
    throw ShapeError(std::string(kind_name(m)) + ": expected dimension " + std::to_string(manifold_dim(m)) +
                     ", got " + std::to_string(u.size()));
  }
}

Signal project_half_circle(const HalfCircle& c, std::span<const double> u) {
  const double dx = u[0] - c.center[0];
  const double dy = u[1] - c.center[1];
  const double r = std::hypot(dx, dy);
  if (r == 0.0) throw DegenerateInputError("half_circle: projection of the center is undefined");
  if (dy >= 0.0) return {c.center[0] + c.radius * dx / r, c.center[1] + c.radius * dy / r};
  const Signal left{c.center[0] - c.radius, c.center[1]};
  const Signal right{c.center[0] + c.radius, c.center[1]};
  return distance(u, right) < distance(u, left) ? right : left;
}

Signal project_ball(const Ball& b, std::span<const double> u) {
  const double d = distance(u, b.center);
  if (d <= b.radius) return Signal(u.begin(), u.end());
  Signal out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = b.center[i] + b.radius * (u[i] - b.center[i]) / d;
  return out;
}

Signal project_half_space(const HalfSpace& h, std::span<const double> u) {
  const double excess = dot(h.normal, u) - h.offset;
  Signal out(u.begin(), u.end());
  if (excess > 0.0)
    for (std::size_t i = 0; i < u.size(); ++i) out[i] -= excess * h.normal[i];
  return out;
}

Signal project_segment(const Segment& s, std::span<const double> u) {
  Signal ab(u.size()), au(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    ab[i] = s.b[i] - s.a[i];
    au[i] = u[i] - s.a[i];
  }
  const double len2 = dot(ab, ab);
  const double t = len2 > 0.0 ? std::clamp(dot(au, ab) / len2, 0.0, 1.0) : 0.0;
  return axpy(s.a, t, ab);
}

}  // namespace

AnalyticManifold make_half_circle(Signal center, double radius) {
  if (center.size() != 2) throw ConfigError("half_circle: center must be 2D");
  if (!(radius > 0.0)) throw ConfigError("half_circle: radius must be > 0");
  return HalfCircle{std::move(center), radius};
}

AnalyticManifold make_ball(Signal center, double radius) {
  if (center.empty()) throw ConfigError("ball: empty center");
  if (!(radius > 0.0)) throw ConfigError("ball: radius must be > 0");
  return Ball{std::move(center), radius};
}

AnalyticManifold make_half_space(Signal normal, double offset) {
  if (normal.empty() || std::abs(norm(normal) - 1.0) > 1e-12) throw ConfigError("half_space: normal must be a unit vector");
  return HalfSpace{std::move(normal), offset};
}

AnalyticManifold make_segment(Signal a, Signal b) {
  if (a.empty() || a.size() != b.size()) throw ConfigError("segment: endpoints must share a nonzero dimension");
  return Segment{std::move(a), std::move(b)};
}

AnalyticManifold make_point_cloud(SampleSet samples) {
  if (samples.empty()) throw ConfigError("point_cloud: needs at least one sample");
  return PointCloud{std::move(samples)};
}

std::size_t manifold_dim(const AnalyticManifold& m) {
  return std::visit(overloaded{[](const HalfCircle&) -> std::size_t { return 2; },
                               [](const Ball& b) { return b.center.size(); },
                               [](const HalfSpace& h) { return h.normal.size(); },
                               [](const Segment& s) { return s.a.size(); },
                               [](const PointCloud& p) { return p.samples.dim(); }},
                    m);
}

bool is_convex(const AnalyticManifold& m) {
  return std::holds_alternative<Ball>(m) || std::holds_alternative<HalfSpace>(m) || std::holds_alternative<Segment>(m);
}

const char* kind_name(const AnalyticManifold& m) {
  static constexpr const char* names[] = {"half_circle", "ball", "half_space", "segment", "point_cloud"};
  return names[m.index()];
}

Signal project_analytic(const AnalyticManifold& m, std::span<const double> u) {
  check_dim(m, u);
  return std::visit(overloaded{[&](const HalfCircle& c) { return project_half_circle(c, u); },
                               [&](const Ball& b) { return project_ball(b, u); },
                               [&](const HalfSpace& h) { return project_half_space(h, u); },
                               [&](const Segment& s) { return project_segment(s, u); },
                               [&](const PointCloud& p) { return brute_force_project(p.samples, u).second; }},
                    m);
}

double distance_analytic(const AnalyticManifold& m, std::span<const double> u) {
  if (const auto* h = std::get_if<HalfSpace>(&m)) {
    check_dim(m, u);
    return std::max(dot(h->normal, u) - h->offset, 0.0);
  }
  if (const auto* b = std::get_if<Ball>(&m)) {
    check_dim(m, u);
    return std::max(distance(u, b->center) - b->radius, 0.0);
  }
  return distance(u, project_analytic(m, u));
}

std::pair<std::size_t, Signal> brute_force_project(const SampleSet& samples, std::span<const double> u) {
  if (samples.empty()) throw ContractError("brute_force_project: empty sample set");
  if (samples.dim() != u.size()) throw ShapeError("brute_force_project: dimension mismatch");
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto s = samples.row(i);
    double d2 = 0.0;
    for (std::size_t c = 0; c < u.size(); ++c) d2 += (s[c] - u[c]) * (s[c] - u[c]);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return {best, samples.signal(best)};
}

SampleSet sample_manifold(const AnalyticManifold& m, std::size_t n, Rng& rng) {
  if (n == 0) throw ContractError("sample_manifold: n must be >= 1");
  const std::size_t dim = manifold_dim(m);
  SampleSet out(n, dim);
  std::visit(overloaded{[&](const HalfCircle& c) {
                          for (std::size_t i = 0; i < n; ++i) {
                            const double phi = rng.uniform(0.0, std::numbers::pi);
                            out.row(i)[0] = c.center[0] + c.radius * std::cos(phi);
                            out.row(i)[1] = c.center[1] + c.radius * std::sin(phi);
                          }
                        },
                        [&](const Ball& b) {
                          for (std::size_t i = 0; i < n; ++i) {
                            Signal dir(dim);
                            double len = 0.0;
                            while (len == 0.0) {
                              for (double& v : dir) v = rng.normal();
                              len = norm(dir);
                            }
                            const double r = b.radius * std::pow(rng.uniform01(), 1.0 / static_cast<double>(dim));
                            for (std::size_t c = 0; c < dim; ++c) out.row(i)[c] = b.center[c] + r * dir[c] / len;
                          }
                        },
                        [&](const HalfSpace& h) {
                          for (std::size_t i = 0; i < n; ++i) {
                            Signal y(dim);
                            for (std::size_t c = 0; c < dim; ++c) y[c] = h.offset * h.normal[c] + rng.normal();
                            const Signal p = project_half_space(h, y);
                            std::copy(p.begin(), p.end(), out.row(i).begin());
                          }
                        },
                        [&](const Segment& s) {
                          for (std::size_t i = 0; i < n; ++i) {
                            const double t = rng.uniform01();
                            for (std::size_t c = 0; c < dim; ++c) out.row(i)[c] = s.a[c] + t * (s.b[c] - s.a[c]);
                          }
                        },
                        [&](const PointCloud& p) {
                          for (std::size_t i = 0; i < n; ++i) {
                            const auto r = p.samples.row(rng.index(p.samples.size()));
                            std::copy(r.begin(), r.end(), out.row(i).begin());
                          }
                        }},
             m);
  return out;
}

SampleSet discretize_half_circle(const HalfCircle& c, std::size_t count) {
  if (count < 2) throw ContractError("discretize_half_circle: need at least two points");
  SampleSet out(count, 2);
  for (std::size_t i = 0; i < count; ++i) {
    const double phi = std::numbers::pi * static_cast<double>(i) / static_cast<double>(count - 1);
    out.row(i)[0] = c.center[0] + c.radius * std::cos(phi);
    out.row(i)[1] = c.center[1] + c.radius * std::sin(phi);
  }
  return out;
}

namespace {

// Rounding-level distances count as on the manifold.
constexpr double kOnManifold = 1e-12;

}  // namespace

ExactDistance::ExactDistance(AnalyticManifold m) : m_(std::move(m)) {}

std::size_t ExactDistance::input_dim() const { return manifold_dim(m_); }

double ExactDistance::value(std::span<const double> u) const { return distance_analytic(m_, u); }

void ExactDistance::evaluate(const SampleSet& batch, std::vector<double>& values, SampleSet* grads) const {
  values.resize(batch.size());
  if (grads) *grads = SampleSet(batch.size(), batch.dim());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto u = batch.row(i);
    const Signal p = project_analytic(m_, u);
    const double d = distance(u, p);
    values[i] = d;
    if (grads && d > kOnManifold) {
      auto g = grads->row(i);
      for (std::size_t c = 0; c < u.size(); ++c) g[c] = (u[c] - p[c]) / d;
    }
  }
}

std::shared_ptr<const DistanceEstimator> exact_distance_stage(const AnalyticManifold& m) {
  return std::make_shared<ExactDistance>(m);
}

}  // namespace wpp::oracle
