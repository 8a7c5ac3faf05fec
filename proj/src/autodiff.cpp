#include "wpp/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "wpp/errors.hpp"

namespace wpp::ad {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMatrix>;
using MapConstMat = Eigen::Map<const RowMatrix>;

Tape& same_tape(Var a, Var b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) throw ContractError("operands recorded on different tapes");
  return *a.tape();
}

void require_same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()) + " differ");
  }
}

/// Elementwise map with derivative df(x, y) evaluated from input x and output y.
template <class F, class DF>
Var unary(Var a, F f, DF df) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  Tape& tape = *a.tape();
  return tape.record(std::move(out), {a}, [a, df](const Tensor& g, std::span<Tensor* const> pg) {
    if (!pg[0]) return;
    const Tensor& x = a.value();
    Tensor& gx = *pg[0];
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] += g[i] * df(x[i]);
  });
}

}  // namespace

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("value() on an unbound Var");
  return tape_->value(*this);
}

Var Tape::variable(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<Var> parents, Backward backward) {
  Node node;
  node.value = std::move(value);
  for (Var p : parents) {
    if (p.tape() != this) throw ContractError("parent recorded on another tape");
    node.parents.push_back(p.id());
    node.requires_grad = node.requires_grad || nodes_[p.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw ContractError("backward: loss recorded on another tape");
  const Node& root = nodes_.at(loss.id());
  if (root.value.size() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " + shape_string(root.value.shape()));
  }
  grads_.assign(nodes_.size(), Tensor());
  std::vector<char> reachable(nodes_.size(), 0);
  reachable[loss.id()] = 1;
  grads_[loss.id()] = Tensor::filled(root.value.shape(), 1.0);

  std::vector<Tensor*> parent_grads;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    if (!reachable[id]) continue;
    Node& node = nodes_[id];
    if (!node.requires_grad || !node.backward) continue;
    parent_grads.clear();
    for (std::size_t p : node.parents) {
      if (nodes_[p].requires_grad) {
        reachable[p] = 1;
        if (grads_[p].size() == 0) grads_[p] = Tensor(nodes_[p].value.shape());
        parent_grads.push_back(&grads_[p]);
      } else {
        parent_grads.push_back(nullptr);
      }
    }
    node.backward(grads_[id], parent_grads);
  }
}

Tensor Tape::grad(Var v) const {
  if (v.id() < grads_.size() && grads_[v.id()].size() != 0) return grads_[v.id()];
  return Tensor(nodes_.at(v.id()).value.shape());
}

Var matmul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  Tensor out = wpp::matmul(a.value(), b.value());
  return tape.record(std::move(out), {a, b}, [a, b](const Tensor& g, std::span<Tensor* const> pg) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const auto m = static_cast<Eigen::Index>(av.dim(0));
    const auto k = static_cast<Eigen::Index>(av.dim(1));
    const auto n = static_cast<Eigen::Index>(bv.rank() == 2 ? bv.dim(1) : 1);
    MapConstMat gm(g.data(), m, n);
    if (pg[0]) MapMat(pg[0]->data(), m, k).noalias() += gm * MapConstMat(bv.data(), k, n).transpose();
    if (pg[1]) MapMat(pg[1]->data(), k, n).noalias() += MapConstMat(av.data(), m, k).transpose() * gm;
  });
}

Var linear(Var x, Var w, Var b) {
  Tape& tape = same_tape(x, w);
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  if (xv.rank() != 2 || wv.rank() != 2 || xv.dim(1) != wv.dim(1) || bv.size() != wv.dim(0)) {
    throw ShapeError("linear: x " + shape_string(xv.shape()) + ", w " + shape_string(wv.shape()) + ", b " +
                     shape_string(bv.shape()));
  }
  const auto n = static_cast<Eigen::Index>(xv.dim(0));
  const auto in = static_cast<Eigen::Index>(xv.dim(1));
  const auto out_dim = static_cast<Eigen::Index>(wv.dim(0));
  Tensor out({xv.dim(0), wv.dim(0)});
  MapMat om(out.data(), n, out_dim);
  om.noalias() = MapConstMat(xv.data(), n, in) * MapConstMat(wv.data(), out_dim, in).transpose();
  om.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bv.data(), out_dim);
  return tape.record(std::move(out), {x, w, b}, [x, w, n, in, out_dim](const Tensor& g, std::span<Tensor* const> pg) {
    MapConstMat gm(g.data(), n, out_dim);
    if (pg[0]) MapMat(pg[0]->data(), n, in).noalias() += gm * MapConstMat(w.value().data(), out_dim, in);
    if (pg[1]) MapMat(pg[1]->data(), out_dim, in).noalias() += gm.transpose() * MapConstMat(x.value().data(), n, in);
    if (pg[2]) Eigen::Map<Eigen::RowVectorXd>(pg[2]->data(), out_dim) += gm.colwise().sum();
  });
}

Var add(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  require_same_shape("add", a, b);
  Tensor out = a.value();
  out += b.value();
  return tape.record(std::move(out), {a, b}, [](const Tensor& g, std::span<Tensor* const> pg) {
    if (pg[0]) *pg[0] += g;
    if (pg[1]) *pg[1] += g;
  });
}

Var sub(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  require_same_shape("sub", a, b);
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return tape.record(std::move(out), {a, b}, [](const Tensor& g, std::span<Tensor* const> pg) {
    if (pg[0]) *pg[0] += g;
    if (pg[1])
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[1])[i] -= g[i];
  });
}

Var mul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  require_same_shape("mul", a, b);
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return tape.record(std::move(out), {a, b}, [a, b](const Tensor& g, std::span<Tensor* const> pg) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (pg[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i] * bv[i];
    if (pg[1])
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[1])[i] += g[i] * av[i];
  });
}

Var scale(Var a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double) { return s; });
}

Var add_scalar(Var a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double) { return 1.0; });
}

Var square(Var a) {
  return unary(a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

Var pow(Var a, double p) {
  if (p < 1.0) throw ContractError("pow: exponent must be >= 1");
  return unary(
      a, [p](double x) { return std::pow(std::max(x, 0.0), p); },
      [p](double x) { return x > 0.0 ? p * std::pow(x, p - 1.0) : (p == 1.0 ? 1.0 : 0.0); });
}

Var abs(Var a) {
  return unary(a, [](double x) { return std::abs(x); },
               [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var huber(Var a, double delta) {
  if (!(delta > 0.0)) throw ContractError("huber: delta must be > 0");
  return unary(
      a,
      [delta](double x) {
        const double ax = std::abs(x);
        return ax <= delta ? x * x / (2.0 * delta) : ax - 0.5 * delta;
      },
      [delta](double x) {
        if (std::abs(x) <= delta) return x / delta;
        return x > 0.0 ? 1.0 : -1.0;
      });
}

Var prelu(Var a, Var slope) {
  Tape& tape = same_tape(a, slope);
  if (slope.value().size() != 1) throw ShapeError("prelu: slope must be a single value");
  const double c = slope.value()[0];
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] >= 0.0 ? av[i] : c * av[i];
  return tape.record(std::move(out), {a, slope}, [a, slope](const Tensor& g, std::span<Tensor* const> pg) {
    const Tensor& x = a.value();
    const double c = slope.value()[0];
    double dc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const bool pos = x[i] >= 0.0;
      if (pg[0]) (*pg[0])[i] += pos ? g[i] : c * g[i];
      if (!pos) dc += g[i] * x[i];
    }
    if (pg[1]) (*pg[1])[0] += dc;
  });
}

Var groupsort(Var a, std::size_t group_size) {
  const Tensor& av = a.value();
  if (group_size == 0 || av.size() % group_size != 0) {
    throw ShapeError("groupsort: " + std::to_string(av.size()) + " values not divisible into groups of " +
                     std::to_string(group_size));
  }
  Tensor out(av.shape());
  std::vector<std::size_t> perm(av.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t start = 0; start < av.size(); start += group_size) {
    auto first = perm.begin() + static_cast<std::ptrdiff_t>(start);
    std::stable_sort(first, first + static_cast<std::ptrdiff_t>(group_size),
                     [&av](std::size_t i, std::size_t j) { return av[i] < av[j]; });
  }
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[perm[i]];
  return a.tape()->record(std::move(out), {a}, [perm = std::move(perm)](const Tensor& g, std::span<Tensor* const> pg) {
    if (!pg[0]) return;
    for (std::size_t i = 0; i < perm.size(); ++i) (*pg[0])[perm[i]] += g[i];
  });
}

Var sum(Var a) {
  const Tensor& av = a.value();
  double s = 0.0;
  for (double v : av.values()) s += v;
  return a.tape()->record(Tensor::scalar(s), {a}, [](const Tensor& g, std::span<Tensor* const> pg) {
    if (!pg[0]) return;
    for (double& v : pg[0]->values()) v += g[0];
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ContractError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var dot(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  if (a.value().size() != b.value().size()) throw ShapeError("dot: size mismatch");
  const double s = wpp::dot(a.value().values(), b.value().values());
  return tape.record(Tensor::scalar(s), {a, b}, [a, b](const Tensor& g, std::span<Tensor* const> pg) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (pg[0])
      for (std::size_t i = 0; i < av.size(); ++i) (*pg[0])[i] += g[0] * bv[i];
    if (pg[1])
      for (std::size_t i = 0; i < av.size(); ++i) (*pg[1])[i] += g[0] * av[i];
  });
}

Var reshape(Var a, Tensor::Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.tape()->record(std::move(out), {a}, [](const Tensor& g, std::span<Tensor* const> pg) {
    if (!pg[0]) return;
    for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i];
  });
}

namespace {

struct ConvDims {
  std::size_t n, c, h, w, o, k, stride, oh, ow;
  std::size_t patch() const { return c * k * k; }
  std::size_t positions() const { return oh * ow; }
};

void im2col(const double* x, const ConvDims& d, RowMatrix& cols) {
  cols.resize(static_cast<Eigen::Index>(d.patch()), static_cast<Eigen::Index>(d.positions()));
  for (std::size_t ch = 0; ch < d.c; ++ch)
    for (std::size_t ki = 0; ki < d.k; ++ki)
      for (std::size_t kj = 0; kj < d.k; ++kj) {
        const auto row = static_cast<Eigen::Index>((ch * d.k + ki) * d.k + kj);
        for (std::size_t oi = 0; oi < d.oh; ++oi)
          for (std::size_t oj = 0; oj < d.ow; ++oj) {
            const std::size_t yi = oi * d.stride + ki, xj = oj * d.stride + kj;
            cols(row, static_cast<Eigen::Index>(oi * d.ow + oj)) = x[(ch * d.h + yi) * d.w + xj];
          }
      }
}

void col2im_add(const RowMatrix& cols, const ConvDims& d, double* gx) {
  for (std::size_t ch = 0; ch < d.c; ++ch)
    for (std::size_t ki = 0; ki < d.k; ++ki)
      for (std::size_t kj = 0; kj < d.k; ++kj) {
        const auto row = static_cast<Eigen::Index>((ch * d.k + ki) * d.k + kj);
        for (std::size_t oi = 0; oi < d.oh; ++oi)
          for (std::size_t oj = 0; oj < d.ow; ++oj) {
            const std::size_t yi = oi * d.stride + ki, xj = oj * d.stride + kj;
            gx[(ch * d.h + yi) * d.w + xj] += cols(row, static_cast<Eigen::Index>(oi * d.ow + oj));
          }
      }
}

}  // namespace

Var conv2d(Var x, Var kernels, Var bias, std::size_t stride) {
  Tape& tape = same_tape(x, kernels);
  const Tensor& xv = x.value();
  const Tensor& kv = kernels.value();
  if (xv.rank() != 4 || kv.rank() != 4 || kv.dim(1) != xv.dim(1) || kv.dim(2) != kv.dim(3) || stride == 0 ||
      bias.value().size() != kv.dim(0) || xv.dim(2) < kv.dim(2) || xv.dim(3) < kv.dim(3)) {
    throw ShapeError("conv2d: x " + shape_string(xv.shape()) + ", kernels " + shape_string(kv.shape()));
  }
  ConvDims d{xv.dim(0), xv.dim(1), xv.dim(2), xv.dim(3), kv.dim(0), kv.dim(2), stride, 0, 0};
  d.oh = (d.h - d.k) / stride + 1;
  d.ow = (d.w - d.k) / stride + 1;

  Tensor out({d.n, d.o, d.oh, d.ow});
  MapConstMat km(kv.data(), static_cast<Eigen::Index>(d.o), static_cast<Eigen::Index>(d.patch()));
  Eigen::Map<const Eigen::VectorXd> bm(bias.value().data(), static_cast<Eigen::Index>(d.o));
  RowMatrix cols;
  const std::size_t in_stride = d.c * d.h * d.w, out_stride = d.o * d.positions();
  for (std::size_t s = 0; s < d.n; ++s) {
    im2col(xv.data() + s * in_stride, d, cols);
    MapMat om(out.data() + s * out_stride, static_cast<Eigen::Index>(d.o), static_cast<Eigen::Index>(d.positions()));
    om.noalias() = km * cols;
    om.colwise() += bm;
  }

  return tape.record(std::move(out), {x, kernels, bias}, [x, kernels, d](const Tensor& g, std::span<Tensor* const> pg) {
    const Tensor& xv = x.value();
    const auto o = static_cast<Eigen::Index>(d.o), patch = static_cast<Eigen::Index>(d.patch()),
               pos = static_cast<Eigen::Index>(d.positions());
    MapConstMat km(kernels.value().data(), o, patch);
    const std::size_t in_stride = d.c * d.h * d.w, out_stride = d.o * d.positions();
    RowMatrix cols, gcols;
    for (std::size_t s = 0; s < d.n; ++s) {
      MapConstMat gm(g.data() + s * out_stride, o, pos);
      if (pg[1]) {
        im2col(xv.data() + s * in_stride, d, cols);
        MapMat(pg[1]->data(), o, patch).noalias() += gm * cols.transpose();
      }
      if (pg[2]) Eigen::Map<Eigen::VectorXd>(pg[2]->data(), o) += gm.rowwise().sum();
      if (pg[0]) {
        gcols.noalias() = km.transpose() * gm;
        col2im_add(gcols, d, pg[0]->data() + s * in_stride);
      }
    }
  });
}

}  // namespace wpp::ad

namespace wpp {

Signal finite_diff_grad(const std::function<double(std::span<const double>)>& f, std::span<const double> u,
                        double h) {
  if (!(h > 0.0)) throw ContractError("finite_diff_grad: step must be positive");
  Signal probe(u.begin(), u.end());
  Signal g(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double fp = f(probe);
    probe[i] = orig - h;
    const double fm = f(probe);
    probe[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace wpp
