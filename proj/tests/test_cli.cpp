#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "wpp/errors.hpp"
#include "wpp/experiment.hpp"
#include "wpp/oracle.hpp"
#include "wpp/problems.hpp"
#include "wpp/schedule.hpp"

namespace fs = std::filesystem;
using namespace wpp;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("wpp_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct CliResult {
  int code = -1;
  std::string err;
};

CliResult wpp_cli(const std::string& args, const fs::path& dir) {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string(WPP_CLI) + " " + args + " > " + (dir / "stdout.txt").string() + " 2> " +
                          err.string();
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(err);
  std::stringstream ss;
  ss << in.rdbuf();
  r.err = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json toy_config_json() { return experiment::config_to_json(experiment::preset_config(experiment::Preset::toy)); }

void write_json(const json& j, const fs::path& p) { std::ofstream(p) << j.dump(2); }

// One toy training run shared by the tests that need a learned schedule.
class TrainedToy : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = scratch("toy");
    const CliResult r = wpp_cli("train --preset toy --out " + (dir_ / "run").string(), dir_);
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static fs::path dir_;
};
fs::path TrainedToy::dir_;

}  // namespace

TEST(Config, PresetRoundTrip) {
  for (auto p : {experiment::Preset::toy, experiment::Preset::ellipse_ct}) {
    const auto c = experiment::preset_config(p);
    EXPECT_EQ(experiment::config_to_json(experiment::config_from_json(experiment::config_to_json(c))),
              experiment::config_to_json(c));
  }
}

TEST(Config, UnknownKeysRejected) {
  json j = toy_config_json();
  j["trian"] = json::object();
  EXPECT_THROW(experiment::config_from_json(j), ConfigError);
  j = toy_config_json();
  j["train"]["learning_rate"] = 0.1;
  try {
    experiment::config_from_json(j);
    FAIL() << "accepted an unknown key";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("learning_rate"), std::string::npos);
  }
}

TEST(Config, TypeAndRangeErrors) {
  json j = toy_config_json();
  j["train"]["stages"] = "twenty";
  EXPECT_THROW(experiment::config_from_json(j), ConfigError);
  j = toy_config_json();
  j["solver"]["kappa"] = 1.5;
  EXPECT_THROW(experiment::config_from_json(j), ConfigError);
  EXPECT_THROW(experiment::parse_preset("spiral"), ConfigError);
}

TEST(Config, ShippedConfigsMatchPresets) {
  const fs::path root = WPP_SOURCE_DIR;
  EXPECT_EQ(experiment::config_to_json(experiment::load_config(root / "configs/toy.json")), toy_config_json());
  EXPECT_EQ(experiment::config_to_json(experiment::load_config(root / "configs/ellipse-ct.json")),
            experiment::config_to_json(experiment::preset_config(experiment::Preset::ellipse_ct)));
}

TEST(Cli, InvalidRelaxationExitsWithUsageError) {
  const fs::path dir = scratch("mu");
  json j = toy_config_json();
  j["train"]["mu"] = {1.5, 0.6};
  write_json(j, dir / "bad.json");
  const CliResult r = wpp_cli("train --config " + (dir / "bad.json").string() + " --out " + (dir / "run").string(), dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("simplex"), std::string::npos) << r.err;
}

TEST(Cli, UnknownKeyExitsWithUsageError) {
  const fs::path dir = scratch("key");
  json j = toy_config_json();
  j["solver"]["iters"] = 5;
  write_json(j, dir / "bad.json");
  const CliResult r = wpp_cli("train --config " + (dir / "bad.json").string(), dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("iters"), std::string::npos) << r.err;
}

TEST(Cli, ZeroStagesWarnsAndWritesEmptySchedule) {
  const fs::path dir = scratch("k0");
  json j = toy_config_json();
  j["train"]["stages"] = 0;
  write_json(j, dir / "k0.json");
  const CliResult r = wpp_cli("train --config " + (dir / "k0.json").string() + " --out " + (dir / "run").string(), dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("warning"), std::string::npos);
  EXPECT_TRUE(load_schedule(dir / "run/schedule.json").stages.empty());
}

TEST(Cli, MissingScheduleExitsWithUsageError) {
  const fs::path dir = scratch("nosched");
  EXPECT_EQ(wpp_cli("solve --preset toy --out " + (dir / "run").string(), dir).code, 2);
  EXPECT_EQ(wpp_cli("solve --preset toy --schedule " + (dir / "none.json").string(), dir).code, 2);
  EXPECT_EQ(wpp_cli("project --schedule " + (dir / "none.json").string() + " --input x.csv --output y.csv", dir).code,
            2);
  EXPECT_EQ(wpp_cli("frobnicate", dir).code, 2);
}

TEST(Cli, IdentityAnchoredScheduleReturnsInput) {
  const fs::path dir = scratch("anchor");
  ProjectorSchedule s;
  s.input_dim = 2;
  s.mu = {0.5, 0.5};
  for (int k = 0; k < 4; ++k) s.stages.push_back({oracle::exact_distance_stage(oracle::make_ball({0, 0}, 1)), 1.0, 1.0});
  save_schedule(s, dir / "schedule.json");
  const SampleSet in = SampleSet::from_rows({{3, 0}, {0.1, -7}, {2, 2}});
  problems::write_signals_csv(in, dir / "in.csv");
  const CliResult r = wpp_cli("project --schedule " + (dir / "schedule.json").string() + " --input " +
                            (dir / "in.csv").string() + " --output " + (dir / "out.csv").string(),
                        dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(problems::read_signals_csv(dir / "out.csv"), in);

  problems::write_signals_csv(SampleSet::from_rows({{1, 2, 3}}), dir / "bad.csv");
  EXPECT_EQ(wpp_cli("project --schedule " + (dir / "schedule.json").string() + " --input " +
                        (dir / "bad.csv").string() + " --output " + (dir / "out.csv").string(),
                    dir)
                .code,
            2);
}

TEST_F(TrainedToy, ArtifactsWritten) {
  const fs::path run = dir_ / "run";
  for (const char* f : {"config.json", "train_log.csv", "schedule.json", "initial.csv", "truth.csv", "final_set.csv"})
    EXPECT_TRUE(fs::exists(run / f)) << f;
  const auto schedule = load_schedule(run / "schedule.json");
  EXPECT_EQ(schedule.stages.size(), 20u);
  EXPECT_EQ(schedule.preset, "toy");
  std::ifstream log(run / "train_log.csv");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(log, line)) ++rows;
  EXPECT_EQ(rows, 21u);
}

TEST_F(TrainedToy, ProjectsTowardsArc) {
  problems::write_signals_csv(SampleSet::from_rows({{2, 2}}), dir_ / "p.csv");
  const CliResult r = wpp_cli("project --schedule " + (dir_ / "run/schedule.json").string() + " --input " +
                            (dir_ / "p.csv").string() + " --output " + (dir_ / "p_out.csv").string(),
                        dir_);
  ASSERT_EQ(r.code, 0) << r.err;
  const SampleSet out = problems::read_signals_csv(dir_ / "p_out.csv");
  ASSERT_EQ(out.size(), 1u);
  EXPECT_LT(distance(out.row(0), Signal{2, 0.75}), 0.15);
}

TEST_F(TrainedToy, TrajectoryRowCount) {
  problems::write_signals_csv(SampleSet::from_rows({{2, 2}, {0, 0}, {3, 1}}), dir_ / "t.csv");
  const CliResult r = wpp_cli("project --trajectory --schedule " + (dir_ / "run/schedule.json").string() + " --input " +
                            (dir_ / "t.csv").string() + " --output " + (dir_ / "t_out.csv").string(),
                        dir_);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(problems::read_signals_csv(dir_ / "t_out.csv").size(), 21u * 3u);
}

TEST_F(TrainedToy, RetrainIsBitIdentical) {
  const CliResult r = wpp_cli("train --preset toy --out " + (dir_ / "again").string(), dir_);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir_ / "again/train_log.csv"), slurp(dir_ / "run/train_log.csv"));
  EXPECT_EQ(slurp(dir_ / "again/schedule.json"), slurp(dir_ / "run/schedule.json"));
}

TEST_F(TrainedToy, SolveEmitsBothTrajectories) {
  const CliResult r = wpp_cli("solve --preset toy --schedule " + (dir_ / "run/schedule.json").string() + " --out " +
                            (dir_ / "solve").string(),
                        dir_);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "solve/trajectory_analytic.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "solve/trajectory_wp.csv"));
  const json m = json::parse(slurp(dir_ / "solve/metrics.json"));
  EXPECT_LT(m.at("endpoint_gap").get<double>(), 0.05);
}

TEST(Cli, TinyCtRunEmitsMetrics) {
  const fs::path dir = scratch("ct");
  json j = experiment::config_to_json(experiment::preset_config(experiment::Preset::ellipse_ct));
  j["dataset"]["train_true"] = 6;
  j["dataset"]["train_fake"] = 6;
  j["dataset"]["test_count"] = 2;
  j["dataset"]["tv_grid"] = {1e-3};
  j["dataset"]["tv_iterations"] = 50;
  j["train"]["stages"] = 2;
  j["train"]["inner_steps"] = 2;
  j["train"]["batch_size"] = 4;
  j["solver"]["iterations"] = 2;
  write_json(j, dir / "ct.json");
  const std::string base = "--config " + (dir / "ct.json").string() + " --out " + (dir / "run").string();
  CliResult r = wpp_cli("train " + base, dir);
  ASSERT_EQ(r.code, 0) << r.err;
  r = wpp_cli("solve " + base + " --schedule " + (dir / "run/schedule.json").string(), dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const json m = json::parse(slurp(dir / "run/metrics.json"));
  EXPECT_TRUE(m.contains("tv_psnr") && m.contains("wp_psnr") && m.contains("tv_ssim") && m.contains("wp_ssim"));
  EXPECT_EQ(m.at("wp_psnr_each").size(), 2u);
  EXPECT_TRUE(fs::exists(dir / "run/test_00_wp.pgm"));
  EXPECT_TRUE(fs::exists(dir / "run/test_01_sinogram.csv"));
  EXPECT_TRUE(fs::exists(dir / "run/dataset.json"));
}
