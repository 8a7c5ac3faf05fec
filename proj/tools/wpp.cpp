#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "wpp/checks.hpp"
#include "wpp/errors.hpp"
#include "wpp/experiment.hpp"
#include "wpp/problems.hpp"
#include "wpp/schedule.hpp"
#include "wpp/solvers.hpp"
#include "wpp/wpproject.hpp"

namespace fs = std::filesystem;
using namespace wpp;
using nlohmann::json;

namespace {

constexpr int kUsageError = 2;
constexpr int kNumericalError = 3;

struct ExperimentArgs {
  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_experiment_flags(CLI::App* cmd, ExperimentArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config (JSON)");
  cmd->add_option("--preset", args.preset, "start from a built-in preset")
      ->check(CLI::IsMember({"toy", "ellipse-ct"}));
  cmd->add_option("--seed", args.seed, "override the config seed");
  cmd->add_option("--out", args.out, "output directory (overrides the config)");
}

experiment::ExperimentConfig resolve(const ExperimentArgs& args) {
  if (!args.config_path.empty() && !args.preset.empty()) throw ConfigError("use either --config or --preset, not both");
  experiment::ExperimentConfig c;
  if (!args.config_path.empty())
    c = experiment::load_config(args.config_path);
  else
    c = experiment::preset_config(experiment::parse_preset(args.preset.empty() ? "toy" : args.preset));
  if (args.seed) c.seed = *args.seed;
  if (!args.out.empty()) c.output_dir = args.out;
  return c;
}

fs::path prepare_output(const experiment::ExperimentConfig& c) {
  const fs::path dir = c.output_dir;
  fs::create_directories(dir);
  std::ofstream(dir / "config.json") << experiment::config_to_json(c).dump(2) << '\n';
  return dir;
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json ct_manifest(const experiment::ExperimentConfig& c, const experiment::CtData& data) {
  return {{"seed", c.seed},
          {"tv_weight", data.tv_weight},
          {"radon_nonzeros", data.a.nonzeros()},
          {"dataset", experiment::config_to_json(c)["dataset"]},
          {"note", "initializer is TV (no filtered backprojection)"}};
}

int cmd_train(const ExperimentArgs& args) {
  const auto c = resolve(args);
  const fs::path dir = prepare_output(c);
  if (c.train.stages == 0) std::cerr << "warning: stages = 0, the schedule will contain no stages\n";
  std::ofstream log(dir / "train_log.csv");
  log << "k,dual_loss,beta,gamma,grad_norm\n";
  log.precision(17);
  const auto on_stage = [&](const wptrain::StageLog& s) {
    log << s.k << ',' << s.dual_loss << ',' << s.beta << ',' << s.gamma << ',' << s.grad_norm << '\n';
    std::printf("stage %zu  dual %.6f  beta %.6f  gamma %.4f  grad_norm %.4f\n", s.k, s.dual_loss, s.beta, s.gamma,
                s.grad_norm);
    std::fflush(stdout);
  };
  wptrain::TrainResult result;
  if (c.preset == experiment::Preset::toy) {
    const auto data = experiment::toy_data(c);
    problems::write_signals_csv(data.initial, dir / "initial.csv");
    problems::write_signals_csv(data.truth, dir / "truth.csv");
    result = experiment::train_on(c, data.initial, data.truth, on_stage);
  } else {
    const auto data = experiment::make_ct_data(c);
    write_json(ct_manifest(c, data), dir / "dataset.json");
    std::printf("dataset ready (tv weight %.3g)\n", data.tv_weight);
    result = experiment::train_on(c, data.initial, data.truth, on_stage);
  }
  if (c.preset == experiment::Preset::toy) problems::write_signals_csv(result.final_set, dir / "final_set.csv");
  save_schedule(result.schedule, dir / "schedule.json");
  std::printf("wrote %s\n", (dir / "schedule.json").string().c_str());
  return 0;
}

int cmd_project(const std::string& schedule_path, const std::string& input, const std::string& output,
                bool trajectory, std::optional<std::size_t> steps) {
  const auto schedule = load_schedule(schedule_path);
  const SampleSet in = problems::read_signals_csv(input);
  if (!in.empty() && in.dim() != schedule.input_dim)
    throw ShapeError("input dimension " + std::to_string(in.dim()) + " does not match the schedule (" +
                     std::to_string(schedule.input_dim) + ")");
  ProjectOptions options;
  options.num_steps = steps;
  options.repeat_last_stage = steps.has_value();
  SampleSet out(schedule.input_dim);
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (trajectory) {
      for (const Signal& u : wp_trajectory(schedule, in.row(i), options)) out.push_back(u);
    } else {
      out.push_back(wp_project(schedule, in.row(i), options));
    }
  }
  problems::write_signals_csv(out, output);
  return 0;
}

int cmd_solve(const ExperimentArgs& args, const std::string& schedule_path) {
  if (schedule_path.empty()) throw ConfigError("solve requires --schedule (the WP projector)");
  if (!fs::exists(schedule_path)) throw ConfigError("schedule not found: " + schedule_path);
  const auto c = resolve(args);
  const auto schedule = load_schedule(schedule_path);
  const fs::path dir = prepare_output(c);
  if (c.preset == experiment::Preset::toy) {
    const auto s = experiment::solve_toy(c, schedule);
    solvers::write_trajectory_csv(s.analytic, dir / "trajectory_analytic.csv", false);
    solvers::write_trajectory_csv(s.learned, dir / "trajectory_wp.csv", false);
    const json metrics{{"analytic_final", s.analytic.back().z},
                       {"wp_final", s.learned.back().z},
                       {"arc_minimizer", s.minimizer},
                       {"endpoint_gap", s.endpoint_gap},
                       {"analytic_error", s.analytic_error},
                       {"wp_error", s.learned_error}};
    write_json(metrics, dir / "metrics.json");
    std::printf("analytic (%.5f, %.5f)  wp (%.5f, %.5f)  gap %.5f  minimizer (%.5f, %.5f)\n", s.analytic.back().z[0],
                s.analytic.back().z[1], s.learned.back().z[0], s.learned.back().z[1], s.endpoint_gap, s.minimizer[0],
                s.minimizer[1]);
    return 0;
  }
  const auto data = experiment::make_ct_data(c);
  write_json(ct_manifest(c, data), dir / "dataset.json");
  std::vector<problems::Phantom> recon;
  const auto m = experiment::evaluate_ct(c, data, schedule, &recon);
  const std::size_t n = c.ct.image_size;
  ProjectOptions options;
  options.num_steps = c.projection_steps;
  options.repeat_last_stage = true;
  const solvers::Projector proj = [&](std::span<const double> u) { return wp_project(schedule, u, options); };
  for (std::size_t i = 0; i < recon.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "test_%02zu", i);
    const std::string s = stem;
    problems::write_pgm(data.test_truth[i], dir / (s + "_truth.pgm"));
    problems::write_pgm(data.test_tv[i], dir / (s + "_tv.pgm"));
    problems::write_pgm(recon[i], dir / (s + "_wp.pgm"));
    problems::write_image_csv(recon[i], dir / (s + "_wp.csv"));
    SampleSet sino(data.test_data[i].size());
    sino.push_back(data.test_data[i]);
    problems::write_signals_csv(sino, dir / (s + "_sinogram.csv"));
    const auto traj = solvers::relaxed_projected_gradient(data.a, data.test_data[i], data.test_tv[i].pixels, c.solver, proj);
    solvers::write_trajectory_csv(traj, dir / (s + "_trajectory.csv"), true);
  }
  json metrics{{"tv_psnr", m.tv_psnr},           {"tv_ssim", m.tv_ssim},           {"wp_psnr", m.wp_psnr},
               {"wp_ssim", m.wp_ssim},           {"tv_psnr_each", m.tv_psnr_each}, {"wp_psnr_each", m.wp_psnr_each},
               {"tv_weight", data.tv_weight},    {"image_size", n}};
  write_json(metrics, dir / "metrics.json");
  std::printf("TV  psnr %.3f dB  ssim %.4f\nWP  psnr %.3f dB  ssim %.4f\n", m.tv_psnr, m.tv_ssim, m.wp_psnr, m.wp_ssim);
  return 0;
}

int cmd_verify(const std::string& fault) {
  if (!fault.empty() && fault != "wrong-adjoint") throw ConfigError("unknown fault '" + fault + "'");
  const auto results = checks::invariant_suite(fault == "wrong-adjoint");
  bool all = true;
  for (const auto& r : results) {
    std::printf("%-4s  %-34s %7.2fs  %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.seconds, r.detail.c_str());
    all = all && r.passed;
  }
  std::printf("%s\n", all ? "all checks passed" : "some checks FAILED");
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wasserstein-based projections: train, project, solve, verify"};
  app.require_subcommand(1);

  ExperimentArgs train_args;
  auto* train = app.add_subcommand("train", "train a projector schedule");
  add_experiment_flags(train, train_args);

  std::string schedule_path, input, output;
  bool trajectory = false;
  std::optional<std::size_t> steps;
  auto* project = app.add_subcommand("project", "apply a trained projector to signals in a CSV file");
  project->add_option("--schedule", schedule_path, "schedule JSON")->required();
  project->add_option("--input", input, "input CSV, one signal per row")->required();
  project->add_option("--output,--out", output, "output CSV")->required();
  project->add_flag("--trajectory", trajectory, "write every iterate (stages + 1 rows per input)");
  project->add_option("--steps", steps, "number of Halpern steps (reuses the last stage beyond the schedule)");

  ExperimentArgs solve_args;
  std::string solve_schedule;
  auto* solve = app.add_subcommand("solve", "solve the preset's inverse problem with the trained projector");
  add_experiment_flags(solve, solve_args);
  solve->add_option("--schedule", solve_schedule, "schedule JSON");

  std::string fault;
  auto* verify = app.add_subcommand("verify", "run the oracle and invariant suite");
  verify->add_option("--inject-fault", fault)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*train) return cmd_train(train_args);
    if (*project) return cmd_project(schedule_path, input, output, trajectory, steps);
    if (*solve) return cmd_solve(solve_args, solve_schedule);
    if (*verify) return cmd_verify(fault);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const SingularityError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsageError;
  } catch (const ShapeError& e) {
    std::cerr << "dimension error: " << e.what() << '\n';
    return kUsageError;
  } catch (const ContractError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
