#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "wpp/signal.hpp"
#include "wpp/tensor.hpp"

namespace wpp::ad {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while its Tape lives.
class Var {
 public:
  Var() = default;
  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor& value() const;
  const Tensor::Shape& shape() const { return value().shape(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode tape. Every operation appends a node holding its forward value
/// and a closure that maps the output adjoint to parent adjoints.
///
/// Recording order is a topological order, so backward() walks the nodes in
/// reverse and visits each node reachable from the loss once.
class Tape {
 public:
  /// Accumulates into parent adjoints; entries are null for parents that need no gradient.
  using Backward = std::function<void(const Tensor& out_grad, std::span<Tensor* const> parent_grads)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable leaf.
  Var variable(Tensor value);
  /// Leaf excluded from differentiation.
  Var constant(Tensor value);
  Var record(Tensor value, std::vector<Var> parents, Backward backward);

  const Tensor& value(Var v) const { return nodes_.at(v.id()).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }
  std::size_t node_count() const noexcept { return nodes_.size(); }

  /// Throws ContractError unless `loss` holds a single value.
  void backward(Var loss);
  /// Adjoint of `v` from the last backward(); zeros when `v` was not reached.
  Tensor grad(Var v) const;

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> parents;
    Backward backward;
    bool requires_grad = false;
  };
  std::deque<Node> nodes_;
  std::vector<Tensor> grads_;
};

// Matrix products. linear(x, w, b) = x * w^T + b with x: n x in, w: out x in, b: out.
Var matmul(Var a, Var b);
Var linear(Var x, Var w, Var b);

// Elementwise arithmetic on equal shapes.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var square(Var a);
/// x^p for x >= 0 and p >= 1.
Var pow(Var a, double p);
Var abs(Var a);
Var huber(Var a, double delta);
/// x for x >= 0, slope * x otherwise; `slope` is a one-element Var.
Var prelu(Var a, Var slope);
/// Sorts each consecutive block of `group_size` values ascending.
Var groupsort(Var a, std::size_t group_size);

// Reductions to a scalar.
Var sum(Var a);
Var mean(Var a);
Var dot(Var a, Var b);

Var reshape(Var a, Tensor::Shape shape);

/// 2D convolution (cross-correlation), no padding.
/// x: n x C x H x W, kernels: O x C x k x k, bias: O -> n x O x OH x OW with OH = (H-k)/stride + 1.
Var conv2d(Var x, Var kernels, Var bias, std::size_t stride);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }

}  // namespace wpp::ad

namespace wpp {

/// Central differences (f(u + h e_i) - f(u - h e_i)) / 2h per coordinate.
Signal finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                        std::span<const double> u, double h);

}  // namespace wpp
