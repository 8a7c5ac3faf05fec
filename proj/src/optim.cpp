#include "wpp/optim.hpp"

#include <algorithm>
#include <cmath>

#include "wpp/errors.hpp"

namespace wpp::optim {

AdamState::AdamState(AdamConfig config, const std::vector<const Tensor*>& params) : config_(config) {
  for (const Tensor* p : params) {
    m_.emplace_back(p->shape());
    v_.emplace_back(p->shape());
  }
}

void adam_step(AdamState& state, std::span<Tensor* const> params, std::span<const Tensor> grads) {
  if (params.size() != grads.size() || params.size() != state.m_.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters, " +
                     std::to_string(grads.size()) + " gradients, " + std::to_string(state.m_.size()) + " moments");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(grads[i]) || !params[i]->same_shape(state.m_[i])) {
      throw ShapeError("adam_step: shape mismatch at parameter " + std::to_string(i));
    }
  }
  const AdamConfig& c = state.config_;
  state.t_ += 1;
  const double t = static_cast<double>(state.t_);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    Tensor& m = state.m_[i];
    Tensor& v = state.v_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bias1;
      const double v_hat = v[j] / bias2;
      p[j] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

SampleSet penalty_interpolates(const SampleSet& true_batch, const SampleSet& fake_batch, std::size_t count,
                               Rng& rng) {
  if (true_batch.empty() || fake_batch.empty()) throw ContractError("gradient penalty needs nonempty batches");
  if (true_batch.dim() != fake_batch.dim()) throw ShapeError("gradient penalty: batch dimensions differ");
  const std::size_t dim = true_batch.dim();
  SampleSet out(count, dim);
  for (std::size_t i = 0; i < count; ++i) {
    const auto a = true_batch.row(rng.index(true_batch.size()));
    const auto b = fake_batch.row(rng.index(fake_batch.size()));
    const double eps = rng.uniform01();
    auto r = out.row(i);
    for (std::size_t c = 0; c < dim; ++c) r[c] = eps * a[c] + (1.0 - eps) * b[c];
  }
  return out;
}

ad::Var gradient_penalty_term(ad::Tape& tape, const lipnet::LipNet& net, const lipnet::BoundParams& params,
                              const SampleSet& interpolates, double fd_step) {
  if (interpolates.empty()) throw ContractError("gradient penalty needs at least one interpolate");
  if (!(fd_step > 0.0)) throw ContractError("gradient penalty: finite-difference step must be positive");
  std::vector<double> values;
  SampleSet grads;
  net.evaluate(interpolates, values, &grads);

  SampleSet plus = interpolates, minus = interpolates;
  for (std::size_t i = 0; i < interpolates.size(); ++i) {
    const auto g = grads.row(i);
    const double gn = norm(g);
    if (gn == 0.0) continue;
    auto p = plus.row(i);
    auto m = minus.row(i);
    for (std::size_t c = 0; c < g.size(); ++c) {
      p[c] += fd_step * g[c] / gn;
      m[c] -= fd_step * g[c] / gn;
    }
  }
  ad::Var jp = net.forward(tape, tape.constant(plus.to_tensor()), params);
  ad::Var jm = net.forward(tape, tape.constant(minus.to_tensor()), params);
  ad::Var slope = ad::scale(ad::sub(jp, jm), 1.0 / (2.0 * fd_step));
  return ad::mean(ad::square(ad::add_scalar(slope, -1.0)));
}

double gradient_penalty(const lipnet::LipNet& net, const SampleSet& true_batch, const SampleSet& fake_batch,
                        Rng& rng, const PenaltyConfig& config) {
  const std::size_t count = config.samples ? config.samples : fake_batch.size();
  const SampleSet x = penalty_interpolates(true_batch, fake_batch, count, rng);
  ad::Tape tape;
  const auto params = net.bind(tape, false);
  return gradient_penalty_term(tape, net, params, x, config.fd_step).value().item();
}

void enforce_constraints(lipnet::LipNet& net) {
  for (auto& layer : net.layers()) {
    if (auto* dense = std::get_if<lipnet::DenseLayer>(&layer); dense && dense->mode == lipnet::ConstraintMode::orthonormal) {
      dense->weights = lipnet::orthonormalize(dense->weights);
    }
  }
  for (Tensor& s : net.slopes()) s[0] = std::clamp(s[0], -1.0, 1.0);
}

}  // namespace wpp::optim
