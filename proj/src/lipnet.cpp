#include "wpp/lipnet.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "wpp/errors.hpp"

namespace wpp {

Signal DistanceEstimator::gradient(std::span<const double> u) const {
  SampleSet batch(u.size());
  batch.push_back(u);
  std::vector<double> values;
  SampleSet grads;
  evaluate(batch, values, &grads);
  return grads.signal(0);
}

}  // namespace wpp

namespace wpp::lipnet {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Tensor uniform_tensor(Tensor::Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

Tensor random_orthonormal(std::size_t out, std::size_t in, Rng& rng) {
  Tensor g({out, in});
  for (double& v : g.values()) v = rng.normal();
  return orthonormalize(g);
}

}  // namespace

LipNet::LipNet(std::size_t input_dim, std::vector<Layer> layers, Activation activation, OutputHead head)
    : input_dim_(input_dim), layers_(std::move(layers)), activation_(activation), head_(head) {
  if (activation_.kind == Activation::Kind::prelu && !layers_.empty()) {
    slopes_.assign(layers_.size() - 1, Tensor::scalar(0.25));
  }
  validate();
}

void LipNet::validate() const {
  if (layers_.empty()) throw ShapeError("LipNet needs at least one layer");
  if (head_.kind == OutputHead::Kind::huber && !(head_.delta > 0.0)) throw ContractError("huber delta must be > 0");
  std::size_t features = input_dim_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    std::visit(
        [&](const auto& layer) {
          using T = std::decay_t<decltype(layer)>;
          if constexpr (std::is_same_v<T, DenseLayer>) {
            if (layer.weights.rank() != 2 || layer.in() != features || layer.bias.size() != layer.out()) {
              throw ShapeError("dense layer " + std::to_string(i) + " expects " + std::to_string(features) +
                               " inputs, has weights " + shape_string(layer.weights.shape()));
            }
            features = layer.out();
          } else {
            if (layer.kernels.rank() != 4 || layer.in_size() != features ||
                layer.bias.size() != layer.out_channels() || layer.in_height < layer.kernel() ||
                layer.in_width < layer.kernel()) {
              throw ShapeError("conv layer " + std::to_string(i) + " does not fit " + std::to_string(features) +
                               " inputs");
            }
            features = layer.out_size();
          }
        },
        layers_[i]);
    if (i + 1 < layers_.size() && activation_.kind == Activation::Kind::groupsort &&
        features % activation_.group_size != 0) {
      throw ShapeError("layer width " + std::to_string(features) + " not divisible by group size");
    }
  }
  if (features != 1) throw ShapeError("LipNet output must be scalar, got width " + std::to_string(features));
}

std::vector<Tensor*> LipNet::parameters() {
  std::vector<Tensor*> out;
  for (auto& layer : layers_) {
    std::visit(
        [&](auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, DenseLayer>) {
            out.push_back(&l.weights);
          } else {
            out.push_back(&l.kernels);
          }
          out.push_back(&l.bias);
        },
        layer);
  }
  for (auto& s : slopes_) out.push_back(&s);
  return out;
}

std::vector<const Tensor*> LipNet::parameters() const {
  auto mut = const_cast<LipNet*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

std::size_t LipNet::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* p : parameters()) n += p->size();
  return n;
}

BoundParams LipNet::bind(ad::Tape& tape, bool differentiable) const {
  BoundParams bound;
  for (const Tensor* p : parameters()) bound.vars.push_back(differentiable ? tape.variable(*p) : tape.constant(*p));
  return bound;
}

ad::Var LipNet::forward(ad::Tape& tape, ad::Var batch, const BoundParams& params) const {
  (void)tape;
  const Tensor::Shape& in_shape = batch.shape();
  if (in_shape.size() != 2 || in_shape[1] != input_dim_) {
    throw ShapeError("LipNet expects n x " + std::to_string(input_dim_) + " input, got " + shape_string(in_shape));
  }
  const std::size_t n = in_shape[0];
  ad::Var h = batch;
  std::size_t p = 0;
  const std::size_t slope_base = 2 * layers_.size();
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (const auto* dense = std::get_if<DenseLayer>(&layers_[i])) {
      if (h.shape().size() != 2) h = ad::reshape(h, {n, dense->in()});
      h = ad::linear(h, params.vars[p], params.vars[p + 1]);
    } else {
      const auto& conv = std::get<ConvLayer>(layers_[i]);
      h = ad::reshape(h, {n, conv.in_channels(), conv.in_height, conv.in_width});
      h = ad::conv2d(h, params.vars[p], params.vars[p + 1], conv.stride);
    }
    p += 2;
    if (i + 1 < layers_.size()) {
      if (activation_.kind == Activation::Kind::groupsort) {
        h = ad::groupsort(h, activation_.group_size);
      } else {
        h = ad::prelu(h, params.vars[slope_base + i]);
      }
    }
  }
  h = ad::reshape(h, {n});
  return head_.kind == OutputHead::Kind::abs ? ad::abs(h) : ad::huber(h, head_.delta);
}

void LipNet::evaluate(const SampleSet& batch, std::vector<double>& values, SampleSet* grads) const {
  if (batch.dim() != input_dim_ && !batch.empty()) {
    throw ShapeError("LipNet input dimension " + std::to_string(input_dim_) + ", got " + std::to_string(batch.dim()));
  }
  values.clear();
  if (batch.empty()) {
    if (grads) *grads = SampleSet(input_dim_);
    return;
  }
  ad::Tape tape;
  ad::Var x = grads ? tape.variable(batch.to_tensor()) : tape.constant(batch.to_tensor());
  const BoundParams params = bind(tape, false);
  ad::Var j = forward(tape, x, params);
  const Tensor& jv = j.value();
  values.assign(jv.values().begin(), jv.values().end());
  if (grads) {
    // Rows do not interact, so d(sum J)/dx holds each row's own input gradient.
    tape.backward(ad::sum(j));
    *grads = SampleSet::from_tensor(tape.grad(x));
  }
}

double LipNet::forward(std::span<const double> u) const {
  if (u.size() != input_dim_) throw ShapeError("LipNet::forward: dimension mismatch");
  SampleSet batch(input_dim_);
  batch.push_back(u);
  std::vector<double> values;
  evaluate(batch, values, nullptr);
  return values[0];
}

Signal LipNet::grad_input(std::span<const double> u) const {
  if (u.size() != input_dim_) throw ShapeError("LipNet::grad_input: dimension mismatch");
  SampleSet batch(input_dim_);
  batch.push_back(u);
  std::vector<double> values;
  SampleSet grads;
  evaluate(batch, values, &grads);
  return grads.signal(0);
}

Tensor groupsort(const Tensor& v, std::size_t group_size) {
  if (group_size == 0 || v.size() % group_size != 0) {
    throw ShapeError("groupsort: length " + std::to_string(v.size()) + " not divisible by " +
                     std::to_string(group_size));
  }
  Tensor out = v;
  auto values = out.values();
  for (std::size_t start = 0; start < values.size(); start += group_size) {
    std::sort(values.begin() + static_cast<std::ptrdiff_t>(start),
              values.begin() + static_cast<std::ptrdiff_t>(start + group_size));
  }
  return out;
}

double huber(double x, double delta) {
  if (!(delta > 0.0)) throw ContractError("huber: delta must be > 0");
  const double ax = std::abs(x);
  return ax <= delta ? x * x / (2.0 * delta) : ax - 0.5 * delta;
}

Tensor orthonormalize(const Tensor& w) {
  if (w.rank() != 2) throw ShapeError("orthonormalize expects a matrix, got " + shape_string(w.shape()));
  constexpr int kMaxIterations = 100;
  constexpr double kTolerance = 1e-8;
  const auto rows = static_cast<Eigen::Index>(w.dim(0));
  const auto cols = static_cast<Eigen::Index>(w.dim(1));
  const bool tall = rows >= cols;
  Eigen::MatrixXd x = Eigen::Map<const RowMatrix>(w.data(), rows, cols);

  // Scale so every singular value lies in (0, sqrt(3)), where Newton-Schulz converges.
  // The power estimate is a lower bound on sigma_max; Frobenius caps it from above.
  const double fro = x.norm();
  if (!(fro > 0.0) || !std::isfinite(fro)) throw SingularityError("orthonormalize: zero or non-finite matrix");
  Eigen::MatrixXd gram = tall ? Eigen::MatrixXd(x.transpose() * x) : Eigen::MatrixXd(x * x.transpose());
  Eigen::VectorXd v = Eigen::VectorXd::Ones(gram.rows());
  double lambda = 0.0;
  for (int i = 0; i < 30; ++i) {
    Eigen::VectorXd gv = gram * v;
    const double n = gv.norm();
    if (n == 0.0) break;
    lambda = v.dot(gv) / v.squaredNorm();
    v = gv / n;
  }
  const double sigma_est = std::sqrt(std::max(lambda, 0.0));
  const double scale = sigma_est > 0.0 ? std::min(1.1 * sigma_est, fro) : fro;
  x /= scale;

  const Eigen::Index small = std::min(rows, cols);
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(small, small);
  auto residual = [&](const Eigen::MatrixXd& m) {
    return tall ? (m.transpose() * m - identity).norm() : (m * m.transpose() - identity).norm();
  };
  for (int it = 0; it < kMaxIterations; ++it) {
    if (residual(x) < kTolerance) {
      // One extra step takes the quadratically converging iterate to machine precision.
      x = 1.5 * x - 0.5 * x * (x.transpose() * x);
      Tensor out({w.dim(0), w.dim(1)});
      Eigen::Map<RowMatrix>(out.data(), rows, cols) = x;
      return out;
    }
    x = 1.5 * x - 0.5 * x * (x.transpose() * x);
    if (!x.allFinite()) break;
  }
  throw SingularityError("orthonormalize: matrix " + shape_string(w.shape()) + " is numerically rank deficient");
}

double orthonormality_residual(const Tensor& w) {
  if (w.rank() != 2) throw ShapeError("orthonormality_residual expects a matrix");
  const auto rows = static_cast<Eigen::Index>(w.dim(0));
  const auto cols = static_cast<Eigen::Index>(w.dim(1));
  Eigen::Map<const RowMatrix> x(w.data(), rows, cols);
  if (rows >= cols) return (x.transpose() * x - Eigen::MatrixXd::Identity(cols, cols)).norm();
  return (x * x.transpose() - Eigen::MatrixXd::Identity(rows, rows)).norm();
}

double lipschitz_audit(const DistanceEstimator& j, Rng& rng, std::size_t num_pairs, const Box& box) {
  const std::size_t dim = j.input_dim();
  if (num_pairs == 0) throw ContractError("lipschitz_audit: num_pairs must be >= 1");
  if (box.lo.size() != dim || box.hi.size() != dim) throw ShapeError("lipschitz_audit: box dimension mismatch");
  SampleSet us(num_pairs, dim), vs(num_pairs, dim);
  for (std::size_t i = 0; i < num_pairs; ++i) {
    for (std::size_t c = 0; c < dim; ++c) {
      us.row(i)[c] = rng.uniform(box.lo[c], box.hi[c]);
      vs.row(i)[c] = rng.uniform(box.lo[c], box.hi[c]);
    }
  }
  std::vector<double> ju, jv;
  j.evaluate(us, ju, nullptr);
  j.evaluate(vs, jv, nullptr);
  double worst = 0.0;
  for (std::size_t i = 0; i < num_pairs; ++i) {
    const double d = distance(us.row(i), vs.row(i));
    if (d > 0.0) worst = std::max(worst, std::abs(ju[i] - jv[i]) / d);
  }
  return worst;
}

LipNet make_dense_net(const std::vector<std::size_t>& dims, Activation activation, OutputHead head,
                      ConstraintMode mode, Rng& rng) {
  if (dims.size() < 2 || dims.back() != 1) throw ShapeError("make_dense_net: dims must end in 1");
  std::vector<Layer> layers;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const std::size_t in = dims[i], out = dims[i + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    DenseLayer layer;
    layer.mode = mode;
    layer.weights = mode == ConstraintMode::orthonormal ? random_orthonormal(out, in, rng)
                                                        : uniform_tensor({out, in}, bound, rng);
    layer.bias = uniform_tensor({out}, bound, rng);
    layers.emplace_back(std::move(layer));
  }
  return LipNet(dims.front(), std::move(layers), activation, head);
}

LipNet make_toy_net(Rng& rng) {
  return make_dense_net({2, 10, 10, 10, 10, 10, 10, 10, 1}, Activation{Activation::Kind::groupsort, 2},
                        OutputHead{OutputHead::Kind::abs, 1.0}, ConstraintMode::orthonormal, rng);
}

LipNet make_ct_net(std::size_t image_size, Rng& rng, std::size_t fc_hidden, double huber_delta) {
  std::vector<Layer> layers;
  std::size_t channels = 1, height = image_size, width = image_size;
  for (std::size_t out_ch : {32u, 64u, 1u}) {
    ConvLayer conv;
    const std::size_t fan_in = channels * 16;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    conv.kernels = uniform_tensor({out_ch, channels, 4, 4}, bound, rng);
    conv.bias = uniform_tensor({out_ch}, bound, rng);
    conv.stride = 2;
    conv.in_height = height;
    conv.in_width = width;
    if (height < 4 || width < 4) throw ShapeError("make_ct_net: image too small for three stride-2 convolutions");
    height = conv.out_height();
    width = conv.out_width();
    channels = out_ch;
    layers.emplace_back(std::move(conv));
  }
  const std::size_t flat = channels * height * width;
  for (auto [in, out] : {std::pair{flat, fc_hidden}, std::pair{fc_hidden, std::size_t{1}}}) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    DenseLayer dense;
    dense.mode = ConstraintMode::penalized;
    dense.weights = uniform_tensor({out, in}, bound, rng);
    dense.bias = uniform_tensor({out}, bound, rng);
    layers.emplace_back(std::move(dense));
  }
  return LipNet(image_size * image_size, std::move(layers), Activation{Activation::Kind::prelu, 0},
                OutputHead{OutputHead::Kind::huber, huber_delta});
}

}  // namespace wpp::lipnet
