#include "wpp/schedule.hpp"

#include <fstream>

#include "wpp/errors.hpp"
#include "wpp/oracle.hpp"

namespace wpp {

using nlohmann::json;

void validate_relaxation(const Relaxation& mu) {
  const double m1 = mu.mean_weight, m2 = mu.pointwise_weight;
  if (!(m1 >= 0.0 && m2 >= 0.0) || !(m1 + m2 < 2.0) || (m1 == 0.0 && m2 == 0.0)) {
    throw ConfigError("relaxation mu=(" + std::to_string(m1) + ", " + std::to_string(m2) +
                      ") must be nonzero, nonnegative and inside the simplex region mu_1 + mu_2 < 2");
  }
}

Signal g_step(std::span<const double> u, const DistanceEstimator& j, double beta, const Relaxation& mu) {
  SampleSet batch(u.size());
  batch.push_back(u);
  return g_step(batch, j, beta, mu).signal(0);
}

SampleSet g_step(const SampleSet& batch, const DistanceEstimator& j, double beta, const Relaxation& mu) {
  if (!batch.empty() && batch.dim() != j.input_dim()) throw ShapeError("g_step: dimension mismatch");
  std::vector<double> values;
  SampleSet grads;
  j.evaluate(batch, values, &grads);
  SampleSet out = batch;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double lambda = step_size(mu, beta, values[i]);
    auto r = out.row(i);
    const auto g = grads.row(i);
    for (std::size_t c = 0; c < r.size(); ++c) r[c] -= lambda * g[c];
  }
  return out;
}

namespace {

const char* mode_name(lipnet::ConstraintMode m) {
  return m == lipnet::ConstraintMode::orthonormal ? "orthonormal" : "penalized";
}

lipnet::ConstraintMode mode_from(const std::string& s) {
  if (s == "orthonormal") return lipnet::ConstraintMode::orthonormal;
  if (s == "penalized") return lipnet::ConstraintMode::penalized;
  throw ConfigError("unknown constraint mode '" + s + "'");
}

Tensor tensor_from(const json& values, Tensor::Shape shape) {
  return Tensor(std::move(shape), values.get<std::vector<double>>());
}

json manifold_to_json(const oracle::AnalyticManifold& m) {
  json j;
  j["kind"] = oracle::kind_name(m);
  if (const auto* c = std::get_if<oracle::HalfCircle>(&m)) {
    j["center"] = c->center;
    j["radius"] = c->radius;
  } else if (const auto* b = std::get_if<oracle::Ball>(&m)) {
    j["center"] = b->center;
    j["radius"] = b->radius;
  } else if (const auto* h = std::get_if<oracle::HalfSpace>(&m)) {
    j["normal"] = h->normal;
    j["offset"] = h->offset;
  } else if (const auto* s = std::get_if<oracle::Segment>(&m)) {
    j["a"] = s->a;
    j["b"] = s->b;
  } else {
    const auto& p = std::get<oracle::PointCloud>(m);
    j["dim"] = p.samples.dim();
    j["samples"] = p.samples.data();
  }
  return j;
}

oracle::AnalyticManifold manifold_from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "half_circle") return oracle::make_half_circle(j.at("center"), j.at("radius"));
  if (kind == "ball") return oracle::make_ball(j.at("center"), j.at("radius"));
  if (kind == "half_space") return oracle::make_half_space(j.at("normal"), j.at("offset"));
  if (kind == "segment") return oracle::make_segment(j.at("a"), j.at("b"));
  if (kind == "point_cloud") {
    SampleSet s(j.at("dim").get<std::size_t>());
    s.data() = j.at("samples").get<std::vector<double>>();
    return oracle::make_point_cloud(std::move(s));
  }
  throw ConfigError("unknown analytic manifold kind '" + kind + "'");
}

}  // namespace

json net_to_json(const lipnet::LipNet& net) {
  json j;
  j["input_dim"] = net.input_dim();
  if (net.activation().kind == lipnet::Activation::Kind::groupsort) {
    j["activation"] = {{"kind", "groupsort"}, {"group_size", net.activation().group_size}};
  } else {
    std::vector<double> slopes;
    for (const Tensor& s : net.slopes()) slopes.push_back(s[0]);
    j["activation"] = {{"kind", "prelu"}, {"slopes", slopes}};
  }
  if (net.head().kind == lipnet::OutputHead::Kind::abs) {
    j["head"] = {{"kind", "abs"}};
  } else {
    j["head"] = {{"kind", "huber"}, {"delta", net.head().delta}};
  }
  json layers = json::array();
  for (const auto& layer : net.layers()) {
    if (const auto* d = std::get_if<lipnet::DenseLayer>(&layer)) {
      layers.push_back({{"kind", "dense"},
                        {"mode", mode_name(d->mode)},
                        {"in", d->in()},
                        {"out", d->out()},
                        {"weights", d->weights.storage()},
                        {"bias", d->bias.storage()}});
    } else {
      const auto& c = std::get<lipnet::ConvLayer>(layer);
      layers.push_back({{"kind", "conv"},
                        {"mode", mode_name(c.mode)},
                        {"in_channels", c.in_channels()},
                        {"out_channels", c.out_channels()},
                        {"kernel", c.kernel()},
                        {"stride", c.stride},
                        {"in_height", c.in_height},
                        {"in_width", c.in_width},
                        {"kernels", c.kernels.storage()},
                        {"bias", c.bias.storage()}});
    }
  }
  j["layers"] = std::move(layers);
  return j;
}

lipnet::LipNet net_from_json(const json& j) {
  std::vector<lipnet::Layer> layers;
  for (const json& l : j.at("layers")) {
    const auto kind = l.at("kind").get<std::string>();
    if (kind == "dense") {
      lipnet::DenseLayer d;
      d.mode = mode_from(l.at("mode"));
      const std::size_t in = l.at("in"), out = l.at("out");
      d.weights = tensor_from(l.at("weights"), {out, in});
      d.bias = tensor_from(l.at("bias"), {out});
      layers.emplace_back(std::move(d));
    } else if (kind == "conv") {
      lipnet::ConvLayer c;
      c.mode = mode_from(l.at("mode"));
      const std::size_t ic = l.at("in_channels"), oc = l.at("out_channels"), k = l.at("kernel");
      c.kernels = tensor_from(l.at("kernels"), {oc, ic, k, k});
      c.bias = tensor_from(l.at("bias"), {oc});
      c.stride = l.at("stride");
      c.in_height = l.at("in_height");
      c.in_width = l.at("in_width");
      layers.emplace_back(std::move(c));
    } else {
      throw ConfigError("unknown layer kind '" + kind + "'");
    }
  }
  lipnet::Activation act;
  const json& a = j.at("activation");
  if (a.at("kind") == "groupsort") {
    act.kind = lipnet::Activation::Kind::groupsort;
    act.group_size = a.at("group_size");
  } else if (a.at("kind") == "prelu") {
    act.kind = lipnet::Activation::Kind::prelu;
  } else {
    throw ConfigError("unknown activation kind");
  }
  lipnet::OutputHead head;
  const json& h = j.at("head");
  if (h.at("kind") == "abs") {
    head.kind = lipnet::OutputHead::Kind::abs;
  } else if (h.at("kind") == "huber") {
    head.kind = lipnet::OutputHead::Kind::huber;
    head.delta = h.at("delta");
  } else {
    throw ConfigError("unknown head kind");
  }
  lipnet::LipNet net(j.at("input_dim"), std::move(layers), act, head);
  if (act.kind == lipnet::Activation::Kind::prelu) {
    const auto slopes = a.at("slopes").get<std::vector<double>>();
    if (slopes.size() != net.slopes().size()) throw ConfigError("prelu slope count does not match layer count");
    for (std::size_t i = 0; i < slopes.size(); ++i) net.slopes()[i][0] = slopes[i];
  }
  return net;
}

json schedule_to_json(const ProjectorSchedule& schedule) {
  json stages = json::array();
  for (const Stage& s : schedule.stages) {
    json js{{"beta", s.beta}, {"gamma", s.gamma}};
    if (const auto* n = dynamic_cast<const lipnet::NetworkEstimator*>(s.estimator.get())) {
      js["theta"] = net_to_json(n->net());
    } else if (const auto* e = dynamic_cast<const oracle::ExactDistance*>(s.estimator.get())) {
      js["analytic"] = manifold_to_json(e->manifold());
    } else {
      throw ContractError("schedule_to_json: stage estimator is not serializable");
    }
    stages.push_back(std::move(js));
  }
  return json{{"mu", {schedule.mu.mean_weight, schedule.mu.pointwise_weight}},
              {"input_dim", schedule.input_dim},
              {"stages", std::move(stages)},
              {"preset", schedule.preset},
              {"seed", schedule.seed}};
}

ProjectorSchedule schedule_from_json(const json& j) {
  ProjectorSchedule s;
  const auto mu = j.at("mu").get<std::vector<double>>();
  if (mu.size() != 2) throw ConfigError("schedule: mu must have two entries");
  s.mu = Relaxation{mu[0], mu[1]};
  validate_relaxation(s.mu);
  s.input_dim = j.at("input_dim");
  s.preset = j.value("preset", std::string{});
  s.seed = j.value("seed", std::uint64_t{0});
  for (const json& js : j.at("stages")) {
    Stage st;
    st.beta = js.at("beta");
    st.gamma = js.at("gamma");
    if (js.contains("theta")) {
      st.estimator = std::make_shared<lipnet::NetworkEstimator>(net_from_json(js.at("theta")));
    } else if (js.contains("analytic")) {
      st.estimator = oracle::exact_distance_stage(manifold_from_json(js.at("analytic")));
    } else {
      throw ConfigError("schedule stage needs either 'theta' or 'analytic'");
    }
    if (st.estimator->input_dim() != s.input_dim) throw ShapeError("schedule stage dimension mismatch");
    s.stages.push_back(std::move(st));
  }
  return s;
}

void save_schedule(const ProjectorSchedule& schedule, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write schedule to " + path.string());
  out << schedule_to_json(schedule).dump(1) << '\n';
}

ProjectorSchedule load_schedule(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read schedule " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("schedule " + path.string() + " is not valid JSON: " + e.what());
  }
  return schedule_from_json(j);
}

}  // namespace wpp
