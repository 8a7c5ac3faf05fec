#include "wpp/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <utility>

#include "wpp/errors.hpp"
#include "wpp/wpproject.hpp"

namespace wpp::experiment {

using nlohmann::json;

namespace {

constexpr std::uint64_t kDataStream = 1;
constexpr std::uint64_t kNetStream = 2;
constexpr std::uint64_t kTrainStream = 3;

/// Reads the members of one JSON object, remembering which keys were consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  void get(const char* key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path_ + "." + key + ": wrong type");
    }
  }

  void get(const char* key, std::size_t& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    const json& v = j_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      throw ConfigError(path_ + "." + key + ": expected a nonnegative integer");
    out = v.get<std::size_t>();
  }

  void get(const char* key, double& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(path_ + "." + key + ": expected a number");
    out = v.get<double>();
    if (!std::isfinite(out)) throw ConfigError(path_ + "." + key + ": not finite");
  }

  void get(const char* key, std::optional<double>& out) {
    if (!j_.contains(key)) return;
    if (j_.at(key).is_null()) {
      seen_.insert(key);
      out.reset();
      return;
    }
    double v = 0.0;
    get(key, v);
    out = v;
  }

  void get(const char* key, std::optional<std::size_t>& out) {
    if (!j_.contains(key)) return;
    if (j_.at(key).is_null()) {
      seen_.insert(key);
      out.reset();
      return;
    }
    std::size_t v = 0;
    get(key, v);
    out = v;
  }

  Section child(const char* key) {
    seen_.insert(key);
    return Section(j_.at(key), path_ + "." + key);
  }

  /// Throws ConfigError naming the first key that was never read.
  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ConfigError("unknown config key " + path_ + "." + key);
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

const char* noise_kind_name(problems::NoiseModel::Kind k) {
  return k == problems::NoiseModel::Kind::per_beam ? "per_beam" : "mean_relative";
}

void read_toy_dataset(Section s, ToyDatasetConfig& d) {
  s.get("initial_count", d.initial_count);
  s.get("true_count", d.true_count);
  s.finish();
  require(d.initial_count > 0 && d.true_count > 0, "dataset: sample counts must be positive");
}

void read_ct_dataset(Section s, CtDatasetConfig& d) {
  s.get("image_size", d.image_size);
  s.get("train_true", d.train_true);
  s.get("train_fake", d.train_fake);
  s.get("test_count", d.test_count);
  s.get("num_angles", d.geometry.num_angles);
  s.get("num_detectors", d.geometry.num_detectors);
  s.get("detector_span", d.geometry.detector_span);
  if (s.has("noise")) {
    Section n = s.child("noise");
    std::string kind = noise_kind_name(d.noise.kind);
    n.get("kind", kind);
    if (kind == "mean_relative")
      d.noise.kind = problems::NoiseModel::Kind::mean_relative;
    else if (kind == "per_beam")
      d.noise.kind = problems::NoiseModel::Kind::per_beam;
    else
      throw ConfigError("dataset.noise.kind must be mean_relative or per_beam");
    n.get("level", d.noise.level);
    n.finish();
  }
  if (s.has("ellipses")) {
    Section e = s.child("ellipses");
    e.get("min_ellipses", d.ellipses.min_ellipses);
    e.get("max_ellipses", d.ellipses.max_ellipses);
    e.get("min_intensity", d.ellipses.min_intensity);
    e.get("max_intensity", d.ellipses.max_intensity);
    e.get("min_axis", d.ellipses.min_axis);
    e.get("max_axis", d.ellipses.max_axis);
    e.get("center_range", d.ellipses.center_range);
    e.finish();
  }
  s.get("tv_grid", d.tv_grid);
  s.get("tv_iterations", d.tv_iterations);
  s.finish();
  require(d.image_size >= 8, "dataset.image_size must be at least 8");
  require(d.train_true > 0 && d.train_fake > 0, "dataset: training set sizes must be positive");
  require(d.geometry.num_angles >= 1 && d.geometry.num_detectors >= 1, "dataset: geometry needs angles and detectors");
  require(d.geometry.detector_span > 0.0, "dataset.detector_span must be positive");
  require(d.noise.level >= 0.0, "dataset.noise.level must be nonnegative");
  require(d.ellipses.min_ellipses >= 1 && d.ellipses.min_ellipses <= d.ellipses.max_ellipses,
          "dataset.ellipses: bad ellipse count range");
  require(!d.tv_grid.empty(), "dataset.tv_grid must not be empty");
  for (double w : d.tv_grid) require(std::isfinite(w) && w >= 0.0, "dataset.tv_grid entries must be >= 0");
  require(d.tv_iterations > 0, "dataset.tv_iterations must be positive");
}

void read_train(Section s, wptrain::TrainConfig& t) {
  if (s.has("mu")) {
    std::vector<double> mu;
    try {
      mu = s.raw("mu").get<std::vector<double>>();
    } catch (const json::exception&) {
      throw ConfigError("train.mu: expected [mu_1, mu_2]");
    }
    require(mu.size() == 2, "train.mu: expected [mu_1, mu_2]");
    t.mu = {mu[0], mu[1]};
  }
  s.get("tau", t.tau);
  s.get("p", t.p);
  s.get("gamma_coefficient", t.gamma_coefficient);
  s.get("stages", t.stages);
  s.get("inner_steps", t.inner_steps);
  s.get("batch_size", t.batch_size);
  s.get("noise_rel", t.noise_rel);
  s.get("use_penalty", t.use_penalty);
  s.get("lambda_gp", t.penalty.lambda_gp);
  s.get("penalty_samples", t.penalty.samples);
  s.get("penalty_fd_step", t.penalty.fd_step);
  s.get("lr", t.adam.lr);
  s.get("beta1", t.adam.beta1);
  s.get("beta2", t.adam.beta2);
  s.get("eps", t.adam.eps);
  s.finish();
  wptrain::validate(t);
  require(t.penalty.lambda_gp >= 0.0 && t.penalty.fd_step > 0.0, "train: invalid gradient penalty settings");
}

void read_solver(Section s, solvers::SolverConfig& c, std::optional<std::size_t>& projection_steps) {
  s.get("kappa", c.kappa);
  s.get("xi", c.xi);
  s.get("iterations", c.iterations);
  s.get("pdhg_beta", c.pdhg_beta);
  s.get("pdhg_gamma", c.pdhg_gamma);
  s.get("ladmm_beta", c.ladmm_beta);
  s.get("ladmm_gamma", c.ladmm_gamma);
  s.get("projection_steps", projection_steps);
  s.finish();
  solvers::validate(c);
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

solvers::Projector wp_projector(const ExperimentConfig& c, const ProjectorSchedule& schedule) {
  ProjectOptions options;
  options.num_steps = c.projection_steps;
  options.repeat_last_stage = true;
  return [&schedule, options](std::span<const double> u) { return wp_project(schedule, u, options); };
}

Signal clipped(Signal z) {
  for (double& v : z) v = std::clamp(v, 0.0, 1.0);
  return z;
}

}  // namespace

const char* preset_name(Preset p) { return p == Preset::toy ? "toy" : "ellipse-ct"; }

Preset parse_preset(const std::string& name) {
  if (name == "toy") return Preset::toy;
  if (name == "ellipse-ct") return Preset::ellipse_ct;
  throw ConfigError("unknown preset '" + name + "' (expected toy or ellipse-ct)");
}

ExperimentConfig preset_config(Preset p) {
  ExperimentConfig c;
  c.preset = p;
  c.seed = 1;
  if (p == Preset::toy) {
    c.output_dir = "runs/toy";
    c.train.mu = {0.25, 0.5};
    c.train.tau = 10.0;
    c.train.p = 1.0;
    c.train.gamma_coefficient = 0.1;
    c.train.stages = 20;
    c.train.inner_steps = 200;
    c.train.batch_size = 0;
    c.train.noise_rel = 0.01;
    c.train.use_penalty = false;
    c.train.adam.lr = 1e-2;
    c.solver.kappa = 0.1;
    c.solver.xi = 0.08;
    c.solver.iterations = 600;
  } else {
    c.output_dir = "runs/ellipse-ct";
    c.train.mu = {0.5, 0.0};
    c.train.tau = 0.0;
    c.train.p = 2.0;
    c.train.gamma_coefficient = 0.1;
    c.ct.train_true = 1000;
    c.ct.train_fake = 1000;
    c.train.stages = 20;
    c.train.inner_steps = 500;
    c.train.batch_size = 16;
    c.train.noise_rel = 0.01;
    c.train.use_penalty = true;
    c.train.penalty.lambda_gp = 10.0;
    c.train.adam.lr = 1e-4;
    c.solver.kappa = 0.1;
    c.solver.xi = 0.08;
    c.solver.iterations = 10;
  }
  return c;
}

ExperimentConfig config_from_json(const json& j) {
  Section root(j, "config");
  std::string preset = "toy";
  root.get("preset", preset);
  ExperimentConfig c = preset_config(parse_preset(preset));
  root.get("seed", c.seed);
  root.get("output_dir", c.output_dir);
  if (root.has("dataset")) {
    if (c.preset == Preset::toy)
      read_toy_dataset(root.child("dataset"), c.toy);
    else
      read_ct_dataset(root.child("dataset"), c.ct);
  }
  if (root.has("network")) {
    Section n = root.child("network");
    n.get("fc_hidden", c.network.fc_hidden);
    n.get("huber_delta", c.network.huber_delta);
    n.finish();
    require(c.network.fc_hidden > 0 && c.network.huber_delta > 0.0, "network: fc_hidden and huber_delta must be positive");
  }
  if (root.has("train")) read_train(root.child("train"), c.train);
  if (root.has("solver")) read_solver(root.child("solver"), c.solver, c.projection_steps);
  root.finish();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["preset"] = preset_name(c.preset);
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  if (c.preset == Preset::toy) {
    j["dataset"] = {{"initial_count", c.toy.initial_count}, {"true_count", c.toy.true_count}};
  } else {
    const auto& d = c.ct;
    j["dataset"] = {{"image_size", d.image_size},
                    {"train_true", d.train_true},
                    {"train_fake", d.train_fake},
                    {"test_count", d.test_count},
                    {"num_angles", d.geometry.num_angles},
                    {"num_detectors", d.geometry.num_detectors},
                    {"detector_span", d.geometry.detector_span},
                    {"noise", {{"kind", noise_kind_name(d.noise.kind)}, {"level", d.noise.level}}},
                    {"ellipses",
                     {{"min_ellipses", d.ellipses.min_ellipses},
                      {"max_ellipses", d.ellipses.max_ellipses},
                      {"min_intensity", d.ellipses.min_intensity},
                      {"max_intensity", d.ellipses.max_intensity},
                      {"min_axis", d.ellipses.min_axis},
                      {"max_axis", d.ellipses.max_axis},
                      {"center_range", d.ellipses.center_range}}},
                    {"tv_grid", d.tv_grid},
                    {"tv_iterations", d.tv_iterations}};
    j["network"] = {{"fc_hidden", c.network.fc_hidden}, {"huber_delta", c.network.huber_delta}};
  }
  const auto& t = c.train;
  j["train"] = {{"mu", {t.mu.mean_weight, t.mu.pointwise_weight}},
                {"tau", t.tau},
                {"p", t.p},
                {"gamma_coefficient", t.gamma_coefficient},
                {"stages", t.stages},
                {"inner_steps", t.inner_steps},
                {"batch_size", t.batch_size},
                {"noise_rel", t.noise_rel},
                {"use_penalty", t.use_penalty},
                {"lambda_gp", t.penalty.lambda_gp},
                {"penalty_samples", t.penalty.samples},
                {"penalty_fd_step", t.penalty.fd_step},
                {"lr", t.adam.lr},
                {"beta1", t.adam.beta1},
                {"beta2", t.adam.beta2},
                {"eps", t.adam.eps}};
  const auto& s = c.solver;
  j["solver"] = {{"kappa", s.kappa},
                 {"xi", s.xi},
                 {"iterations", s.iterations},
                 {"pdhg_beta", optional_json(s.pdhg_beta)},
                 {"pdhg_gamma", optional_json(s.pdhg_gamma)},
                 {"ladmm_beta", optional_json(s.ladmm_beta)},
                 {"ladmm_gamma", optional_json(s.ladmm_gamma)},
                 {"projection_steps", c.projection_steps ? json(*c.projection_steps) : json(nullptr)}};
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

Rng component_rng(const ExperimentConfig& c, std::uint64_t component) { return Rng(c.seed).derive(component); }

// ---------------------------------------------------------------- toy

Signal toy_constrained_minimizer(const ToyProblem& p, std::size_t grid) {
  if (grid < 2) throw ContractError("toy_constrained_minimizer: grid needs at least two points");
  const auto& arc = std::get<oracle::HalfCircle>(p.manifold);
  constexpr double pi = 3.14159265358979323846;
  Signal best;
  double best_value = 0.0;
  for (std::size_t i = 0; i < grid; ++i) {
    const double phi = pi * static_cast<double>(i) / static_cast<double>(grid - 1);
    Signal z{arc.center[0] + arc.radius * std::cos(phi), arc.center[1] + arc.radius * std::sin(phi)};
    const double v = solvers::objective(p.a, p.d, z);
    if (best.empty() || v < best_value) {
      best = std::move(z);
      best_value = v;
    }
  }
  return best;
}

problems::ToyDataset toy_data(const ExperimentConfig& c) {
  Rng rng = component_rng(c, kDataStream);
  return problems::toy_dataset(rng, c.toy.initial_count, c.toy.true_count);
}

ToySolve solve_toy(const ExperimentConfig& c, const ProjectorSchedule& schedule) {
  const ToyProblem p;
  if (schedule.input_dim != 2) throw ShapeError("solve_toy: schedule dimension must be 2");
  ToySolve s;
  s.analytic = solvers::relaxed_projected_gradient(
      p.a, p.d, p.z1, c.solver, [&](std::span<const double> u) { return oracle::project_analytic(p.manifold, u); });
  s.learned = solvers::relaxed_projected_gradient(p.a, p.d, p.z1, c.solver, wp_projector(c, schedule));
  s.minimizer = toy_constrained_minimizer(p);
  s.endpoint_gap = distance(s.analytic.back().z, s.learned.back().z);
  s.analytic_error = distance(s.analytic.back().z, s.minimizer);
  s.learned_error = distance(s.learned.back().z, s.minimizer);
  return s;
}

// ---------------------------------------------------------------- CT

CtData make_ct_data(const ExperimentConfig& c) {
  const auto& d = c.ct;
  const std::size_t n = d.image_size;
  CtData data;
  data.a = problems::radon_build(d.geometry, n);
  Rng base = component_rng(c, kDataStream);
  Rng phantom_rng = base.derive(1);
  Rng noise_rng = base.derive(2);
  const auto truths = problems::gen_ellipses(phantom_rng, n, d.train_true, d.ellipses);
  const auto fakes = problems::gen_ellipses(phantom_rng, n, d.train_fake, d.ellipses);
  data.test_truth = problems::gen_ellipses(phantom_rng, n, d.test_count, d.ellipses);
  const auto validation = problems::gen_ellipses(phantom_rng, n, 1, d.ellipses);

  auto measure = [&](const problems::Phantom& p) { return problems::add_noise(data.a.apply(p.pixels), d.noise, noise_rng); };
  const Signal d_val = measure(validation[0]);
  data.tv_weight = problems::tv_grid_search(data.a, d_val, validation[0], d.tv_grid, d.tv_iterations);

  data.truth = SampleSet(n * n);
  for (const auto& p : truths) data.truth.push_back(p.pixels);
  data.initial = SampleSet(n * n);
  for (const auto& p : fakes)
    data.initial.push_back(problems::tv_reconstruct(data.a, measure(p), n, data.tv_weight, d.tv_iterations).pixels);
  for (const auto& p : data.test_truth) {
    data.test_data.push_back(measure(p));
    data.test_tv.push_back(problems::tv_reconstruct(data.a, data.test_data.back(), n, data.tv_weight, d.tv_iterations));
  }
  return data;
}

CtMetrics evaluate_ct(const ExperimentConfig& c, const CtData& data, const ProjectorSchedule& schedule,
                      std::vector<problems::Phantom>* reconstructions) {
  const std::size_t n = c.ct.image_size;
  if (schedule.input_dim != n * n) throw ShapeError("evaluate_ct: schedule dimension does not match the images");
  CtMetrics m;
  if (reconstructions) reconstructions->clear();
  const auto projector = wp_projector(c, schedule);
  for (std::size_t i = 0; i < data.test_truth.size(); ++i) {
    const auto& truth = data.test_truth[i];
    const auto& tv = data.test_tv[i];
    const auto traj = solvers::relaxed_projected_gradient(data.a, data.test_data[i], tv.pixels, c.solver, projector);
    const problems::Phantom wp{n, clipped(traj.back().z)};
    m.tv_psnr_each.push_back(problems::psnr(tv, truth));
    m.wp_psnr_each.push_back(problems::psnr(wp, truth));
    m.tv_ssim += problems::ssim(tv, truth);
    m.wp_ssim += problems::ssim(wp, truth);
    if (reconstructions) reconstructions->push_back(wp);
  }
  const double count = static_cast<double>(std::max<std::size_t>(1, data.test_truth.size()));
  for (double v : m.tv_psnr_each) m.tv_psnr += v;
  for (double v : m.wp_psnr_each) m.wp_psnr += v;
  m.tv_psnr /= count;
  m.wp_psnr /= count;
  m.tv_ssim /= count;
  m.wp_ssim /= count;
  return m;
}

// ---------------------------------------------------------------- training

lipnet::LipNet initial_network(const ExperimentConfig& c) {
  Rng rng = component_rng(c, kNetStream);
  if (c.preset == Preset::toy) return lipnet::make_toy_net(rng);
  return lipnet::make_ct_net(c.ct.image_size, rng, c.network.fc_hidden, c.network.huber_delta);
}

wptrain::TrainResult train_on(const ExperimentConfig& c, const SampleSet& initial, const SampleSet& truth,
                              const wptrain::StageObserver& on_stage) {
  wptrain::TrainConfig cfg = c.train;
  cfg.seed = component_rng(c, kTrainStream).next_u64();
  auto result = wptrain::train(cfg, initial, truth, initial_network(c), on_stage);
  result.schedule.preset = preset_name(c.preset);
  result.schedule.seed = c.seed;
  return result;
}

wptrain::TrainResult train_experiment(const ExperimentConfig& c, const wptrain::StageObserver& on_stage) {
  if (c.preset == Preset::toy) {
    const auto data = toy_data(c);
    return train_on(c, data.initial, data.truth, on_stage);
  }
  const auto data = make_ct_data(c);
  return train_on(c, data.initial, data.truth, on_stage);
}

}  // namespace wpp::experiment
