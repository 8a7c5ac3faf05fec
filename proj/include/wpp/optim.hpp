#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "wpp/autodiff.hpp"
#include "wpp/lipnet.hpp"
#include "wpp/rng.hpp"
#include "wpp/signal.hpp"

namespace wpp::optim {

struct AdamConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment estimates for a fixed list of parameter tensors.
class AdamState {
 public:
  AdamState() = default;
  AdamState(AdamConfig config, const std::vector<const Tensor*>& params);

  const AdamConfig& config() const noexcept { return config_; }
  std::size_t step_count() const noexcept { return t_; }
  const std::vector<Tensor>& first_moments() const noexcept { return m_; }
  const std::vector<Tensor>& second_moments() const noexcept { return v_; }

 private:
  friend void adam_step(AdamState&, std::span<Tensor* const>, std::span<const Tensor>);
  AdamConfig config_;
  std::size_t t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

/// Bias-corrected Adam update in place. Throws ShapeError when parameter,
/// gradient and moment shapes disagree.
void adam_step(AdamState& state, std::span<Tensor* const> params, std::span<const Tensor> grads);

struct PenaltyConfig {
  double lambda_gp = 10.0;
  /// Interpolates per batch; 0 uses the fake batch size.
  std::size_t samples = 0;
  /// Step of the directional finite difference.
  double fd_step = 1e-3;
};

/// Random convex combinations eps * t + (1 - eps) * f of randomly paired true/fake rows.
SampleSet penalty_interpolates(const SampleSet& true_batch, const SampleSet& fake_batch, std::size_t count,
                               Rng& rng);

/// mean over interpolates x of (||grad_x J(x)|| - 1)^2, recorded so that its
/// parameter gradient needs first-order differentiation only: the gradient
/// norm is replaced by (J(x + h v) - J(x - h v)) / 2h with v = grad J(x) / ||grad J(x)||
/// held constant.
ad::Var gradient_penalty_term(ad::Tape& tape, const lipnet::LipNet& net, const lipnet::BoundParams& params,
                              const SampleSet& interpolates, double fd_step);

/// Value of the penalty term on freshly drawn interpolates.
double gradient_penalty(const lipnet::LipNet& net, const SampleSet& true_batch, const SampleSet& fake_batch,
                        Rng& rng, const PenaltyConfig& config = {});

/// Re-projects orthonormal-mode dense layers onto orthonormal matrices and
/// clamps PReLU slopes to [-1, 1]. Propagates SingularityError.
void enforce_constraints(lipnet::LipNet& net);

}  // namespace wpp::optim
