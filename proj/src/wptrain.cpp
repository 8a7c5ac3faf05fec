#include "wpp/wptrain.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "wpp/errors.hpp"

namespace wpp::wptrain {
namespace {

void require_nonempty(const SampleSet& a, const SampleSet& b, const char* what) {
  if (a.empty() || b.empty()) throw ContractError(std::string(what) + ": empty sample set");
  if (a.dim() != b.dim()) throw ShapeError(std::string(what) + ": sample dimensions differ");
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

SampleSet draw_batch(const SampleSet& set, std::size_t batch_size, Rng& rng) {
  if (batch_size == 0) return set;
  std::vector<std::size_t> idx(batch_size);
  for (auto& i : idx) i = rng.index(set.size());
  return set.gather(idx);
}

}  // namespace

void validate(const TrainConfig& c) {
  validate_relaxation(c.mu);
  if (!(c.tau >= 0.0)) throw ConfigError("tau must be >= 0");
  if (!(c.p >= 1.0)) throw ConfigError("p must be >= 1");
  if (!(c.gamma_coefficient > 0.0 && c.gamma_coefficient <= 1.0))
    throw ConfigError("gamma coefficient must lie in (0, 1]");
  if (!(c.noise_rel >= 0.0)) throw ConfigError("noise_rel must be >= 0");
  if (!(c.adam.lr > 0.0)) throw ConfigError("learning rate must be > 0");
  if (!(c.penalty.lambda_gp >= 0.0)) throw ConfigError("lambda_gp must be >= 0");
}

double dual_loss(const DistanceEstimator& j, const SampleSet& true_batch, const SampleSet& fake_batch, double tau,
                 double p) {
  require_nonempty(true_batch, fake_batch, "dual_loss");
  std::vector<double> jt, jf;
  j.evaluate(true_batch, jt, nullptr);
  j.evaluate(fake_batch, jf, nullptr);
  double t = 0.0;
  for (double v : jt) t += v + (tau > 0.0 ? tau * std::pow(v, p) : 0.0);
  return t / static_cast<double>(jt.size()) - mean_of(jf);
}

ad::Var dual_loss_term(ad::Tape& tape, const lipnet::LipNet& net, const lipnet::BoundParams& params,
                       const SampleSet& true_batch, const SampleSet& fake_batch, double tau, double p) {
  require_nonempty(true_batch, fake_batch, "dual_loss");
  ad::Var jt = net.forward(tape, tape.constant(true_batch.to_tensor()), params);
  ad::Var jf = net.forward(tape, tape.constant(fake_batch.to_tensor()), params);
  ad::Var t = tau > 0.0 ? ad::add(jt, ad::scale(ad::pow(jt, p), tau)) : jt;
  return ad::sub(ad::mean(t), ad::mean(jf));
}

double mean_distance_gap(const DistanceEstimator& j, const SampleSet& fake_set, const SampleSet& true_set) {
  require_nonempty(fake_set, true_set, "mean_distance_gap");
  std::vector<double> jf, jt;
  j.evaluate(fake_set, jf, nullptr);
  j.evaluate(true_set, jt, nullptr);
  return mean_of(jf) - mean_of(jt);
}

SampleSet push_forward(const SampleSet& current, const SampleSet& initial, double gamma, const DistanceEstimator& j,
                       double beta, const Relaxation& mu) {
  if (current.size() != initial.size() || current.dim() != initial.dim()) {
    throw ShapeError("push_forward: current set has " + std::to_string(current.size()) + " rows, initial set " +
                     std::to_string(initial.size()));
  }
  SampleSet out = g_step(current, j, beta, mu);
  auto& v = out.data();
  const auto& u1 = initial.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = gamma * u1[i] + (1.0 - gamma) * v[i];
  return out;
}

lipnet::LipNet fit_stage(lipnet::LipNet net, const SampleSet& true_set, const SampleSet& fake_set,
                         const TrainConfig& config, Rng& rng, std::vector<double>* losses) {
  require_nonempty(true_set, fake_set, "fit_stage");
  if (config.inner_steps == 0) return net;
  optim::AdamState adam(config.adam, std::as_const(net).parameters());
  for (std::size_t step = 0; step < config.inner_steps; ++step) {
    const SampleSet tb = draw_batch(true_set, config.batch_size, rng);
    const SampleSet fb = draw_batch(fake_set, config.batch_size, rng);
    ad::Tape tape;
    const auto params = net.bind(tape, true);
    ad::Var loss = dual_loss_term(tape, net, params, tb, fb, config.tau, config.p);
    if (config.use_penalty && config.penalty.lambda_gp > 0.0) {
      const std::size_t count = config.penalty.samples ? config.penalty.samples : fb.size();
      const SampleSet x = optim::penalty_interpolates(tb, fb, count, rng);
      ad::Var gp = optim::gradient_penalty_term(tape, net, params, x, config.penalty.fd_step);
      loss = ad::add(loss, ad::scale(gp, config.penalty.lambda_gp));
    }
    if (!std::isfinite(loss.value().item())) throw NumericalError("fit_stage: non-finite training loss");
    if (losses) losses->push_back(loss.value().item());
    tape.backward(loss);
    std::vector<Tensor> grads;
    grads.reserve(params.vars.size());
    for (const ad::Var& v : params.vars) grads.push_back(tape.grad(v));
    const auto ptrs = net.parameters();
    optim::adam_step(adam, ptrs, grads);
    optim::enforce_constraints(net);
  }
  return net;
}

SampleSet smooth_samples(const SampleSet& set, double sigma, Rng& rng) {
  if (!(sigma >= 0.0)) throw ContractError("smooth_samples: sigma must be >= 0");
  const std::vector<double> s(set.dim(), sigma);
  return smooth_samples(set, s, rng);
}

SampleSet smooth_samples(const SampleSet& set, std::span<const double> sigma, Rng& rng) {
  if (sigma.size() != set.dim()) throw ShapeError("smooth_samples: one sigma per coordinate expected");
  for (double s : sigma)
    if (!(s >= 0.0)) throw ContractError("smooth_samples: sigma must be >= 0");
  SampleSet out = set;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto r = out.row(i);
    for (std::size_t c = 0; c < r.size(); ++c)
      if (sigma[c] > 0.0) r[c] += sigma[c] * rng.normal();
  }
  return out;
}

Signal coordinate_range(const SampleSet& set) {
  if (set.empty()) return Signal(set.dim(), 0.0);
  Signal lo = set.signal(0), hi = lo;
  for (std::size_t i = 1; i < set.size(); ++i) {
    const auto r = set.row(i);
    for (std::size_t c = 0; c < r.size(); ++c) {
      lo[c] = std::min(lo[c], r[c]);
      hi[c] = std::max(hi[c], r[c]);
    }
  }
  for (std::size_t c = 0; c < lo.size(); ++c) hi[c] -= lo[c];
  return hi;
}

double grad_norm_monitor(const DistanceEstimator& j, const SampleSet& set) {
  if (set.empty()) throw ContractError("grad_norm_monitor: empty sample set");
  std::vector<double> values;
  SampleSet grads;
  j.evaluate(set, values, &grads);
  double s = 0.0;
  for (std::size_t i = 0; i < grads.size(); ++i) s += dot(grads.row(i), grads.row(i));
  return s / static_cast<double>(grads.size());
}

TrainResult train_with(const TrainConfig& config, const SampleSet& initial, const SampleSet& true_set,
                       const StageFitter& fitter, const StageObserver& on_stage) {
  validate(config);
  require_nonempty(initial, true_set, "train");
  Rng rng(config.seed);
  TrainResult result;
  result.schedule.mu = config.mu;
  result.schedule.input_dim = initial.dim();
  result.schedule.seed = config.seed;
  SampleSet current = initial;
  for (std::size_t k = 1; k <= config.stages; ++k) {
    SampleSet fake = current;
    if (config.noise_rel > 0.0) {
      Signal sigma = coordinate_range(current);
      for (double& s : sigma) s *= config.noise_rel;
      fake = smooth_samples(current, sigma, rng);
    }
    auto estimator = fitter(k, true_set, fake, rng);
    if (!estimator || estimator->input_dim() != initial.dim()) throw ShapeError("train: stage estimator dimension");
    Stage stage{estimator, mean_distance_gap(*estimator, current, true_set), stage_gamma(config, k)};
    if (!std::isfinite(stage.beta)) throw NumericalError("train: non-finite beta at stage " + std::to_string(k));
    result.log.push_back({k, dual_loss(*estimator, true_set, current, config.tau, config.p), stage.beta,
                          stage.gamma, grad_norm_monitor(*estimator, current)});
    if (on_stage) on_stage(result.log.back());
    current = push_forward(current, initial, stage.gamma, *estimator, stage.beta, config.mu);
    result.schedule.stages.push_back(std::move(stage));
  }
  result.final_set = std::move(current);
  return result;
}

TrainResult train(const TrainConfig& config, const SampleSet& initial, const SampleSet& true_set,
                  lipnet::LipNet net_init, const StageObserver& on_stage) {
  if (net_init.input_dim() != initial.dim()) throw ShapeError("train: network input dimension mismatch");
  lipnet::LipNet net = std::move(net_init);
  return train_with(config, initial, true_set,
                    [&](std::size_t, const SampleSet& t, const SampleSet& f, Rng& rng) {
                      net = fit_stage(std::move(net), t, f, config, rng);
                      return std::make_shared<const lipnet::NetworkEstimator>(net);
                    },
                    on_stage);
}

}  // namespace wpp::wptrain
