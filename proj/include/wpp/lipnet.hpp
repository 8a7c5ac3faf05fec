#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <variant>
#include <vector>

#include "wpp/autodiff.hpp"
#include "wpp/estimator.hpp"
#include "wpp/rng.hpp"
#include "wpp/signal.hpp"
#include "wpp/tensor.hpp"

namespace wpp::lipnet {

enum class ConstraintMode { orthonormal, penalized };

struct DenseLayer {
  Tensor weights;  // out x in
  Tensor bias;     // out
  ConstraintMode mode = ConstraintMode::orthonormal;

  std::size_t in() const { return weights.dim(1); }
  std::size_t out() const { return weights.dim(0); }
};

/// Stride-2 convolution over a channels x height x width input, no padding.
struct ConvLayer {
  Tensor kernels;  // out_ch x in_ch x k x k
  Tensor bias;     // out_ch
  std::size_t stride = 2;
  std::size_t in_height = 0;
  std::size_t in_width = 0;
  ConstraintMode mode = ConstraintMode::penalized;

  std::size_t in_channels() const { return kernels.dim(1); }
  std::size_t out_channels() const { return kernels.dim(0); }
  std::size_t kernel() const { return kernels.dim(2); }
  std::size_t out_height() const { return (in_height - kernel()) / stride + 1; }
  std::size_t out_width() const { return (in_width - kernel()) / stride + 1; }
  std::size_t in_size() const { return in_channels() * in_height * in_width; }
  std::size_t out_size() const { return out_channels() * out_height() * out_width(); }
};

using Layer = std::variant<DenseLayer, ConvLayer>;

struct Activation {
  enum class Kind { groupsort, prelu };
  Kind kind = Kind::groupsort;
  std::size_t group_size = 2;
};

struct OutputHead {
  enum class Kind { abs, huber };
  Kind kind = Kind::abs;
  double delta = 1.0;
};

/// Parameters of a LipNet bound to a tape, in LipNet::parameters() order.
struct BoundParams {
  std::vector<ad::Var> vars;
};

/// Nonnegative scalar network J(u): layers with an activation between
/// consecutive layers, followed by an abs or Huber head on the final scalar.
class LipNet {
 public:
  LipNet() = default;
  LipNet(std::size_t input_dim, std::vector<Layer> layers, Activation activation, OutputHead head);

  std::size_t input_dim() const noexcept { return input_dim_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::vector<Layer>& layers() noexcept { return layers_; }
  const Activation& activation() const noexcept { return activation_; }
  const OutputHead& head() const noexcept { return head_; }
  /// One PReLU slope per activation site (empty for groupsort nets).
  const std::vector<Tensor>& slopes() const noexcept { return slopes_; }
  std::vector<Tensor>& slopes() noexcept { return slopes_; }

  /// Weights and biases layer by layer, then PReLU slopes.
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  std::size_t parameter_count() const;

  BoundParams bind(ad::Tape& tape, bool differentiable) const;
  /// Records J for every row of `batch` (n x input_dim); returns an n-vector.
  ad::Var forward(ad::Tape& tape, ad::Var batch, const BoundParams& params) const;

  double forward(std::span<const double> u) const;
  Signal grad_input(std::span<const double> u) const;
  /// Values and (optionally) input gradients for every row.
  void evaluate(const SampleSet& batch, std::vector<double>& values, SampleSet* grads) const;

 private:
  void validate() const;

  std::size_t input_dim_ = 0;
  std::vector<Layer> layers_;
  Activation activation_;
  OutputHead head_;
  std::vector<Tensor> slopes_;
};

/// DistanceEstimator backed by a LipNet.
class NetworkEstimator final : public DistanceEstimator {
 public:
  explicit NetworkEstimator(LipNet net) : net_(std::move(net)) {}
  const LipNet& net() const noexcept { return net_; }

  std::size_t input_dim() const override { return net_.input_dim(); }
  double value(std::span<const double> u) const override { return net_.forward(u); }
  void evaluate(const SampleSet& batch, std::vector<double>& values, SampleSet* grads) const override {
    net_.evaluate(batch, values, grads);
  }

 private:
  LipNet net_;
};

/// Sorts each consecutive group ascending. Throws ShapeError when the length is not divisible.
Tensor groupsort(const Tensor& v, std::size_t group_size);

/// x^2 / (2 delta) for |x| <= delta, |x| - delta / 2 otherwise. Throws ContractError for delta <= 0.
double huber(double x, double delta);

/// Polar factor of W (nearest matrix with orthonormal rows or columns) by
/// Newton-Schulz iteration. Throws SingularityError for numerically rank-deficient W.
Tensor orthonormalize(const Tensor& w);

/// ||W^T W - I||_F when W is tall (in <= out), ||W W^T - I||_F otherwise.
double orthonormality_residual(const Tensor& w);

struct Box {
  Signal lo;
  Signal hi;
};

/// Largest |J(u) - J(v)| / ||u - v|| over `num_pairs` uniform pairs in `box`.
double lipschitz_audit(const DistanceEstimator& j, Rng& rng, std::size_t num_pairs, const Box& box);

/// Dense net with layer widths `dims` (dims.front() = input, dims.back() = 1).
LipNet make_dense_net(const std::vector<std::size_t>& dims, Activation activation, OutputHead head,
                      ConstraintMode mode, Rng& rng);

/// 2 -> 10, six 10x10 hidden layers, 10 -> 1; orthonormal weights, GroupSort(2), abs head.
LipNet make_toy_net(Rng& rng);

/// Three stride-2 4x4 convolutions (32, 64, 1 channels), two fully connected layers
/// (hidden width `fc_hidden`), PReLU activations and a Huber head; penalized mode.
LipNet make_ct_net(std::size_t image_size, Rng& rng, std::size_t fc_hidden = 64, double huber_delta = 1.0);

}  // namespace wpp::lipnet
