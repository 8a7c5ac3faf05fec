#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "wpp/autodiff.hpp"
#include "wpp/errors.hpp"
#include "wpp/rng.hpp"
#include "wpp/tensor.hpp"

using namespace wpp;

namespace {

Tensor random_tensor(Rng& rng, Tensor::Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

using Builder = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

// Contracts the op output with fixed random weights and compares leaf gradients
// with central differences.
double op_gradient_error(const std::vector<Tensor>& inputs, const Builder& build, Rng& rng) {
  Tensor weights;
  auto loss_of = [&](const std::vector<Tensor>& xs, ad::Tape& tape, std::vector<ad::Var>& leaves) {
    leaves.clear();
    for (const Tensor& x : xs) leaves.push_back(tape.variable(x));
    ad::Var out = build(tape, leaves);
    if (weights.size() == 0) weights = random_tensor(rng, out.shape());
    return ad::sum(ad::mul(out, tape.constant(weights)));
  };
  ad::Tape tape;
  std::vector<ad::Var> leaves;
  ad::Var loss = loss_of(inputs, tape, leaves);
  tape.backward(loss);
  double diff = 0.0, scale = 0.0;
  const double h = 1e-6;
  for (std::size_t li = 0; li < inputs.size(); ++li) {
    const Tensor g = tape.grad(leaves[li]);
    for (std::size_t e = 0; e < inputs[li].size(); ++e) {
      auto xs = inputs;
      xs[li][e] += h;
      ad::Tape t1;
      std::vector<ad::Var> l1;
      const double up = loss_of(xs, t1, l1).value().item();
      xs[li][e] -= 2 * h;
      ad::Tape t2;
      std::vector<ad::Var> l2;
      const double down = loss_of(xs, t2, l2).value().item();
      const double fd = (up - down) / (2 * h);
      diff += (fd - g[e]) * (fd - g[e]);
      scale += fd * fd;
    }
  }
  return std::sqrt(diff) / std::max(std::sqrt(scale), 1e-12);
}

}  // namespace

TEST(Matmul, IdentityAndPermutation) {
  const Tensor eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
  EXPECT_EQ(matmul(eye, Tensor::vector({1, 2})).storage(), (std::vector<double>{1, 2}));
  const Tensor perm = Tensor::matrix(2, 2, {0, 1, 1, 0});
  EXPECT_EQ(matmul(perm, Tensor::vector({3, 4})).storage(), (std::vector<double>{4, 3}));
}

TEST(Matmul, MatchesTripleLoop) {
  Rng rng(1);
  const Tensor a = random_tensor(rng, {3, 4}), b = random_tensor(rng, {4, 2});
  const Tensor c = matmul(a, b);
  ASSERT_EQ(c.shape(), (Tensor::Shape{3, 2}));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 4; ++k) s += a.at(i, k) * b.at(k, j);
      EXPECT_NEAR(c.at(i, j), s, 1e-14);
    }
}

TEST(Matmul, DimensionMismatchThrows) {
  EXPECT_THROW(matmul(Tensor({2, 3}), Tensor({2, 2})), ShapeError);
  EXPECT_THROW(Tensor({2, 2}, {1.0, 2.0}), ShapeError);
}

TEST(Backward, SquareAndDot) {
  ad::Tape tape;
  ad::Var x = tape.variable(Tensor::vector({3.0}));
  tape.backward(ad::sum(ad::mul(x, x)));
  EXPECT_DOUBLE_EQ(tape.grad(x)[0], 6.0);

  ad::Tape t2;
  ad::Var a = t2.constant(Tensor::vector({1.5, -2.0, 0.5}));
  ad::Var y = t2.variable(Tensor::vector({0.3, 0.1, 7.0}));
  t2.backward(ad::dot(a, y));
  EXPECT_EQ(t2.grad(y).storage(), (std::vector<double>{1.5, -2.0, 0.5}));
}

TEST(Backward, NonScalarRootThrows) {
  ad::Tape tape;
  ad::Var x = tape.variable(Tensor::vector({1.0, 2.0}));
  EXPECT_THROW(tape.backward(ad::square(x)), ContractError);
}

TEST(Backward, CompositeMlpMatchesFiniteDifferences) {
  Rng rng(2);
  const Tensor x = random_tensor(rng, {5, 3});
  const Tensor w1 = random_tensor(rng, {4, 3}), b1 = random_tensor(rng, {4});
  const Tensor w2 = random_tensor(rng, {1, 4}), b2 = random_tensor(rng, {1});
  auto loss = [&](const Tensor& w) {
    ad::Tape tape;
    ad::Var wv = tape.variable(w);
    ad::Var h = ad::groupsort(ad::linear(tape.constant(x), wv, tape.constant(b1)), 2);
    ad::Var out = ad::abs(ad::linear(h, tape.constant(w2), tape.constant(b2)));
    ad::Var l = ad::mean(ad::huber(out, 1.0));
    tape.backward(l);
    return std::pair{l.value().item(), tape.grad(wv)};
  };
  const auto [value, grad] = loss(w1);
  (void)value;
  const Signal fd = finite_diff_grad(
      [&](std::span<const double> v) {
        return loss(Tensor(w1.shape(), std::vector<double>(v.begin(), v.end()))).first;
      },
      w1.values(), 1e-5);
  double diff = 0.0, norm_fd = 0.0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    diff += (fd[i] - grad[i]) * (fd[i] - grad[i]);
    norm_fd += fd[i] * fd[i];
  }
  EXPECT_LT(std::sqrt(diff / norm_fd), 1e-5);
}

TEST(Backward, EveryNodeVisitedOnceForSharedSubgraph) {
  ad::Tape tape;
  ad::Var x = tape.variable(Tensor::vector({2.0}));
  ad::Var y = ad::square(x);
  // y is used twice; d/dx (y + y) = 4x.
  tape.backward(ad::sum(ad::add(y, y)));
  EXPECT_DOUBLE_EQ(tape.grad(x)[0], 8.0);
}

TEST(FiniteDiff, QuadraticAndCoordinate) {
  const Signal g = finite_diff_grad([](std::span<const double> u) { return 0.5 * (u[0] * u[0] + u[1] * u[1]); },
                                    Signal{1.0, 2.0}, 1e-5);
  EXPECT_NEAR(g[0], 1.0, 1e-8);
  EXPECT_NEAR(g[1], 2.0, 1e-8);
  const Signal e = finite_diff_grad([](std::span<const double> u) { return u[0]; }, Signal{0.3, -4.0, 9.0}, 1e-5);
  EXPECT_NEAR(e[0], 1.0, 1e-9);
  EXPECT_NEAR(e[1], 0.0, 1e-9);
  EXPECT_NEAR(e[2], 0.0, 1e-9);
}

TEST(Rng, ZeroStdGivesMean) {
  Rng a(7);
  const Tensor t = rng_normal(a, 10, 2.5, 0.0);
  for (double v : t.values()) EXPECT_EQ(v, 2.5);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(123), b(123);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
  Rng c(124);
  EXPECT_NE(Rng(123).next_u64(), c.next_u64());
}

TEST(Rng, NormalMeanWithinClt) {
  Rng rng(9);
  const Tensor x = rng_normal(rng, 100000, 0.0, 1.0);
  double mean = 0.0, var = 0.0;
  for (double v : x.values()) mean += v;
  mean /= 1e5;
  for (double v : x.values()) var += (v - mean) * (v - mean);
  EXPECT_LT(std::abs(mean), 0.02);
  EXPECT_NEAR(var / 1e5, 1.0, 0.02);
}

TEST(Rng, UniformMeanAndRange) {
  Rng rng(10);
  const Tensor x = rng_uniform(rng, 100000, -1.0, 3.0);
  double mean = 0.0;
  for (double v : x.values()) {
    ASSERT_GE(v, -1.0);
    ASSERT_LT(v, 3.0);
    mean += v / 1e5;
  }
  // sigma = 4 / sqrt(12)
  EXPECT_LT(std::abs(mean - 1.0), 5 * (4.0 / std::sqrt(12.0)) / std::sqrt(1e5));
}

TEST(Rng, DerivedStreamsDifferAndReproduce) {
  Rng base(5);
  EXPECT_EQ(base.derive(3).next_u64(), Rng(5).derive(3).next_u64());
  EXPECT_NE(base.derive(3).next_u64(), base.derive(4).next_u64());
}

TEST(Autodiff, EveryOpMatchesFiniteDifferencesOn100Instances) {
  Rng rng(11);
  struct Case {
    const char* name;
    std::function<std::vector<Tensor>(Rng&)> inputs;
    Builder build;
  };
  const std::vector<Case> cases = {
      {"matmul", [](Rng& r) { return std::vector{random_tensor(r, {3, 4}), random_tensor(r, {4, 2})}; },
       [](ad::Tape&, const std::vector<ad::Var>& v) { return ad::matmul(v[0], v[1]); }},
      {"linear",
       [](Rng& r) { return std::vector{random_tensor(r, {5, 3}), random_tensor(r, {2, 3}), random_tensor(r, {2})}; },
       [](ad::Tape&, const std::vector<ad::Var>& v) { return ad::linear(v[0], v[1], v[2]); }},
      {"add", [](Rng& r) { return std::vector{random_tensor(r, {6}), random_tensor(r, {6})}; },
       [](ad::Tape&, const std::vector<ad::Var>& v) { return ad::add(v[0], v[1]); }},
      {"sub", [](Rng& r) { return std::vector{random_tensor(r, {6}), random_tensor(r, {6})}; },
       [](ad::Tape&, const std::vector<ad::Var>& v) { return ad::sub(v[0], v[1]); }},
      {"mul", [](Rng& r) { return std::vector{random_tensor(r, {2, 3}), random_tensor(r, {2, 3})}; },
       [](ad::Tape&, const std::vector<ad::Var>& v) { return ad::mul(v[0], v[1]); }},
      {"scale", [](Rng& r) { return std::vector{random_tensor(r, {5})}; },
       [](ad::Tape&, const std::vector<ad::Var>& v) { return ad::scale(v[0], -1.7); }},
      {"add_scalar", [](Rng& r) { return std::vector{random_tensor(r, {5})}; },
       [](ad::Tape&, const std::vector<ad::Var>& v) { return ad::add_scalar(v[0], 0.3); }},
      {"square", [](Rng& r) { return std::vector{random_tensor(r, {5})}; },
       [](ad::Tape&, const std::vector<ad::Var>& v) { return ad::square(v[0]); }},
      {"pow", [](Rng& r) { return std::vector{random_tensor(r, {5}, 0.1, 2.0)}; },
       [](ad::Tape&, const std::vector<ad::Var>& v) { return ad::pow(v[0], 2.5); }},
      {"abs", [](Rng& r) { return std::vector{random_tensor(r, {5})}; },
       [](ad::Tape&, const std::vector<ad::Var>& v) { return ad::abs(v[0]); }},
      {"huber", [](Rng& r) { return std::vector{random_tensor(r, {8}, -3.0, 3.0)}; },
       [](ad::Tape&, const std::vector<ad::Var>& v) { return ad::huber(v[0], 1.0); }},
      {"prelu", [](Rng& r) { return std::vector{random_tensor(r, {8}), random_tensor(r, {1})}; },
       [](ad::Tape&, const std::vector<ad::Var>& v) { return ad::prelu(v[0], v[1]); }},
      {"groupsort", [](Rng& r) { return std::vector{random_tensor(r, {3, 4})}; },
       [](ad::Tape&, const std::vector<ad::Var>& v) { return ad::groupsort(v[0], 2); }},
      {"sum", [](Rng& r) { return std::vector{random_tensor(r, {2, 3})}; },
       [](ad::Tape&, const std::vector<ad::Var>& v) { return ad::sum(v[0]); }},
      {"mean", [](Rng& r) { return std::vector{random_tensor(r, {7})}; },
       [](ad::Tape&, const std::vector<ad::Var>& v) { return ad::mean(v[0]); }},
      {"dot", [](Rng& r) { return std::vector{random_tensor(r, {4}), random_tensor(r, {4})}; },
       [](ad::Tape&, const std::vector<ad::Var>& v) { return ad::dot(v[0], v[1]); }},
      {"reshape", [](Rng& r) { return std::vector{random_tensor(r, {2, 6})}; },
       [](ad::Tape&, const std::vector<ad::Var>& v) { return ad::reshape(v[0], {3, 4}); }},
      {"conv2d",
       [](Rng& r) {
         return std::vector{random_tensor(r, {2, 2, 7, 7}), random_tensor(r, {3, 2, 3, 3}), random_tensor(r, {3})};
       },
       [](ad::Tape&, const std::vector<ad::Var>& v) { return ad::conv2d(v[0], v[1], v[2], 2); }},
  };
  for (const auto& c : cases) {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) worst = std::max(worst, op_gradient_error(c.inputs(rng), c.build, rng));
    EXPECT_LT(worst, 1e-5) << c.name;
  }
}

TEST(Determinism, RepeatedPipelineIsBitIdentical) {
  auto run = [] {
    Rng rng(42);
    const Tensor a = rng_normal(rng, 12, 0, 1).reshaped({3, 4});
    const Tensor b = rng_uniform(rng, 8, -1, 1).reshaped({4, 2});
    ad::Tape tape;
    ad::Var av = tape.variable(a);
    ad::Var l = ad::sum(ad::huber(ad::matmul(av, tape.constant(b)), 1.0));
    tape.backward(l);
    return std::pair{l.value(), tape.grad(av)};
  };
  EXPECT_EQ(run(), run());
}
