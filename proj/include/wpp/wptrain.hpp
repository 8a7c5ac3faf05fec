#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "wpp/autodiff.hpp"
#include "wpp/estimator.hpp"
#include "wpp/lipnet.hpp"
#include "wpp/optim.hpp"
#include "wpp/rng.hpp"
#include "wpp/schedule.hpp"
#include "wpp/signal.hpp"

namespace wpp::wptrain {

struct TrainConfig {
  Relaxation mu{0.5, 0.0};
  double tau = 1e-2;
  double p = 2.0;
  /// gamma_k = gamma_coefficient / k, with the coefficient in (0, 1].
  double gamma_coefficient = 0.1;
  std::size_t stages = 20;
  std::size_t inner_steps = 200;
  /// Rows drawn (with replacement) from each set per step; 0 uses the full sets.
  std::size_t batch_size = 0;
  /// Smoothing noise as a fraction of each coordinate's range; 0 disables.
  double noise_rel = 0.01;
  bool use_penalty = false;
  optim::PenaltyConfig penalty;
  optim::AdamConfig adam;
  std::uint64_t seed = 0;
};

/// Throws ConfigError on an invalid relaxation, tau < 0, p < 1, a coefficient
/// outside (0, 1], noise_rel < 0 or a non-positive learning rate.
void validate(const TrainConfig& config);

inline double stage_gamma(const TrainConfig& config, std::size_t k) {
  return config.gamma_coefficient / static_cast<double>(k);
}

/// mean_true [J + tau J^p] - mean_fake J. Throws ContractError on an empty batch.
double dual_loss(const DistanceEstimator& j, const SampleSet& true_batch, const SampleSet& fake_batch, double tau,
                 double p);
ad::Var dual_loss_term(ad::Tape& tape, const lipnet::LipNet& net, const lipnet::BoundParams& params,
                       const SampleSet& true_batch, const SampleSet& fake_batch, double tau, double p);

/// beta = mean_fake J - mean_true J.
double mean_distance_gap(const DistanceEstimator& j, const SampleSet& fake_set, const SampleSet& true_set);

/// Row i becomes gamma * initial_i + (1 - gamma) * g(current_i). Throws ShapeError when
/// the sets differ in size or dimension.
SampleSet push_forward(const SampleSet& current, const SampleSet& initial, double gamma, const DistanceEstimator& j,
                       double beta, const Relaxation& mu);

/// Adam on the dual loss (plus the gradient penalty when enabled), projecting onto the
/// constraint set after every step. `losses` receives the per-step training loss.
lipnet::LipNet fit_stage(lipnet::LipNet net, const SampleSet& true_set, const SampleSet& fake_set,
                         const TrainConfig& config, Rng& rng, std::vector<double>* losses = nullptr);

/// Adds N(0, sigma^2) to every coordinate. Throws ContractError for sigma < 0.
SampleSet smooth_samples(const SampleSet& set, double sigma, Rng& rng);
/// Per-coordinate standard deviations.
SampleSet smooth_samples(const SampleSet& set, std::span<const double> sigma, Rng& rng);
/// max - min of every coordinate.
Signal coordinate_range(const SampleSet& set);

/// mean ||grad J(u)||^2 over the set.
double grad_norm_monitor(const DistanceEstimator& j, const SampleSet& set);

struct StageLog {
  std::size_t k = 0;
  double dual_loss = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double grad_norm = 0.0;
};

struct TrainResult {
  ProjectorSchedule schedule;
  std::vector<StageLog> log;
  /// P^{K+1}, the fake set after the last push-forward.
  SampleSet final_set;
};

/// Produces J_k from the true set and the (smoothed) fake set of stage k.
using StageFitter =
    std::function<std::shared_ptr<const DistanceEstimator>(std::size_t k, const SampleSet& true_set,
                                                           const SampleSet& fake_set, Rng& rng)>;

using StageObserver = std::function<void(const StageLog&)>;

/// Staged training with an arbitrary per-stage fitter; `on_stage` sees each log entry.
TrainResult train_with(const TrainConfig& config, const SampleSet& initial, const SampleSet& true_set,
                       const StageFitter& fitter, const StageObserver& on_stage = {});

/// Staged training of LipNets, each stage warm-started from the previous one.
TrainResult train(const TrainConfig& config, const SampleSet& initial, const SampleSet& true_set,
                  lipnet::LipNet net_init, const StageObserver& on_stage = {});

}  // namespace wpp::wptrain
