#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "wpp/estimator.hpp"
#include "wpp/lipnet.hpp"
#include "wpp/signal.hpp"

namespace wpp {

/// Relaxation weights (mu_1, mu_2) of the step size mu_1 * beta_k + mu_2 * J(u).
struct Relaxation {
  double mean_weight = 0.5;       // mu_1
  double pointwise_weight = 0.0;  // mu_2
};

/// Throws ConfigError unless mu >= 0 componentwise, mu != 0 and mu_1 + mu_2 < 2.
void validate_relaxation(const Relaxation& mu);

/// One trained stage: distance estimate J_k, mean distance beta_k, anchoring gamma_k.
struct Stage {
  std::shared_ptr<const DistanceEstimator> estimator;
  double beta = 0.0;
  double gamma = 1.0;
};

/// Everything the deployed projection needs: {mu, (J_k, beta_k, gamma_k)}.
struct ProjectorSchedule {
  Relaxation mu;
  std::vector<Stage> stages;
  std::size_t input_dim = 0;
  std::string preset;
  std::uint64_t seed = 0;
};

/// Step length lambda(u) = mu_1 * beta + mu_2 * J(u).
inline double step_size(const Relaxation& mu, double beta, double j) {
  return mu.mean_weight * beta + mu.pointwise_weight * j;
}

/// g(u) = u - (mu_1 beta + mu_2 J(u)) grad J(u).
Signal g_step(std::span<const double> u, const DistanceEstimator& j, double beta, const Relaxation& mu);
/// g applied to every row.
SampleSet g_step(const SampleSet& batch, const DistanceEstimator& j, double beta, const Relaxation& mu);

nlohmann::json net_to_json(const lipnet::LipNet& net);
lipnet::LipNet net_from_json(const nlohmann::json& j);

/// Stages backed by a LipNet serialize under "theta"; exact-distance stages under "analytic".
nlohmann::json schedule_to_json(const ProjectorSchedule& schedule);
ProjectorSchedule schedule_from_json(const nlohmann::json& j);
void save_schedule(const ProjectorSchedule& schedule, const std::filesystem::path& path);
ProjectorSchedule load_schedule(const std::filesystem::path& path);

}  // namespace wpp
