#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wpp/oracle.hpp"
#include "wpp/problems.hpp"
#include "wpp/schedule.hpp"
#include "wpp/solvers.hpp"
#include "wpp/wptrain.hpp"

namespace wpp::experiment {

struct ToyDatasetConfig {
  std::size_t initial_count = 500;
  std::size_t true_count = 50;
};

struct CtDatasetConfig {
  std::size_t image_size = 32;
  /// Ground-truth phantoms forming P_true.
  std::size_t train_true = 200;
  /// Phantoms whose TV reconstructions form P^1 (disjoint from the true set).
  std::size_t train_fake = 200;
  std::size_t test_count = 20;
  problems::RadonGeometry geometry;
  problems::NoiseModel noise;
  problems::EllipseParams ellipses;
  std::vector<double> tv_grid{1e-4, 3e-4, 1e-3, 3e-3, 1e-2};
  std::size_t tv_iterations = 1000;
};

struct NetworkConfig {
  std::size_t fc_hidden = 64;
  double huber_delta = 1.0;
};

enum class Preset { toy, ellipse_ct };

struct ExperimentConfig {
  Preset preset = Preset::toy;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  ToyDatasetConfig toy;
  CtDatasetConfig ct;
  NetworkConfig network;
  wptrain::TrainConfig train;
  solvers::SolverConfig solver;
  /// Halpern steps per projection inside the solvers; unset uses every stage.
  std::optional<std::size_t> projection_steps;
};

const char* preset_name(Preset p);
/// Throws ConfigError for names other than "toy" and "ellipse-ct".
Preset parse_preset(const std::string& name);
ExperimentConfig preset_config(Preset p);

/// Starts from the preset named by "preset" (default toy) and applies the document's
/// values. Unknown keys, wrong types and invalid values raise ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Independent deterministic stream for one pipeline component.
Rng component_rng(const ExperimentConfig& c, std::uint64_t component);

// ---------------------------------------------------------------- toy

struct ToyProblem {
  solvers::DenseOperator a{Tensor::matrix(1, 2, {1.0, 2.0})};
  Signal d{2.0};
  Signal z1{0.5, 1.0};
  oracle::AnalyticManifold manifold = oracle::make_half_circle({2.0, 0.0}, 0.75);
};

/// argmin of 0.5 ||A z - d||^2 over `grid` equally spaced arc points.
Signal toy_constrained_minimizer(const ToyProblem& p, std::size_t grid = 1'000'000);

problems::ToyDataset toy_data(const ExperimentConfig& c);

struct ToySolve {
  solvers::Trajectory analytic;
  solvers::Trajectory learned;
  Signal minimizer;
  double endpoint_gap = 0.0;
  double analytic_error = 0.0;
  double learned_error = 0.0;
};

/// Relaxed projected gradient with the analytic projector and with WP.
ToySolve solve_toy(const ExperimentConfig& c, const ProjectorSchedule& schedule);

// ---------------------------------------------------------------- CT

struct CtData {
  solvers::SparseOperator a{1, 1, {}};
  double tv_weight = 0.0;
  SampleSet truth;
  SampleSet initial;
  std::vector<problems::Phantom> test_truth;
  std::vector<Signal> test_data;
  std::vector<problems::Phantom> test_tv;
};

CtData make_ct_data(const ExperimentConfig& c);

struct CtMetrics {
  double tv_psnr = 0.0, tv_ssim = 0.0;
  double wp_psnr = 0.0, wp_ssim = 0.0;
  std::vector<double> tv_psnr_each, wp_psnr_each;
};

/// Solves every test problem from its TV reconstruction with WP in the relaxed projected
/// gradient iteration; outputs are clipped to [0, 1].
CtMetrics evaluate_ct(const ExperimentConfig& c, const CtData& data, const ProjectorSchedule& schedule,
                      std::vector<problems::Phantom>* reconstructions = nullptr);

// ---------------------------------------------------------------- training

/// Network of the preset, initialized from the config seed.
lipnet::LipNet initial_network(const ExperimentConfig& c);

/// Trains on the preset's data; the schedule carries the preset name and seed.
/// `on_stage` is called after every stage with its log entry.
wptrain::TrainResult train_experiment(const ExperimentConfig& c,
                                      const wptrain::StageObserver& on_stage = {});
wptrain::TrainResult train_on(const ExperimentConfig& c, const SampleSet& initial, const SampleSet& truth,
                              const wptrain::StageObserver& on_stage = {});

}  // namespace wpp::experiment
