#include <gtest/gtest.h>

#include <cmath>

#include "wpp/errors.hpp"
#include "wpp/lipnet.hpp"
#include "wpp/optim.hpp"

using namespace wpp;
using namespace wpp::optim;

namespace {

double max_param_diff(const lipnet::LipNet& a, const lipnet::LipNet& b) {
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  double worst = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i)
    for (std::size_t j = 0; j < pa[i]->size(); ++j) worst = std::max(worst, std::abs((*pa[i])[j] - (*pb[i])[j]));
  return worst;
}

double worst_residual(const lipnet::LipNet& net) {
  double worst = 0.0;
  for (const auto& layer : net.layers())
    if (const auto* d = std::get_if<lipnet::DenseLayer>(&layer))
      worst = std::max(worst, lipnet::orthonormality_residual(d->weights));
  return worst;
}

SampleSet random_set(Rng& rng, std::size_t n, std::size_t dim, double lo, double hi) {
  SampleSet s(n, dim);
  for (double& v : s.data()) v = rng.uniform(lo, hi);
  return s;
}

lipnet::LipNet linear_net(double w0, double w1, double bias, lipnet::ConstraintMode mode) {
  lipnet::DenseLayer layer{Tensor::matrix(1, 2, {w0, w1}), Tensor::vector({bias}), mode};
  return lipnet::LipNet(2, {layer}, lipnet::Activation{}, lipnet::OutputHead{});
}

}  // namespace

TEST(Adam, FirstStepIsSignedLearningRate) {
  Tensor x = Tensor::vector({1.0, -2.0, 0.5});
  AdamState state(AdamConfig{0.01, 0.9, 0.999, 1e-8}, {&x});
  const std::vector<Tensor> g{Tensor::vector({3.0, -0.2, 1e-3})};
  std::vector<Tensor*> params{&x};
  adam_step(state, params, g);
  EXPECT_NEAR(x[0], 1.0 - 0.01, 1e-8);
  EXPECT_NEAR(x[1], -2.0 + 0.01, 1e-8);
  EXPECT_NEAR(x[2], 0.5 - 0.01, 1e-7);
  EXPECT_EQ(state.step_count(), 1u);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Tensor x = Tensor::vector({1.0, 2.0});
  AdamState state(AdamConfig{0.1}, {&x});
  std::vector<Tensor*> params{&x};
  const std::vector<Tensor> g{Tensor::vector({0.0, 0.0})};
  for (int i = 0; i < 5; ++i) adam_step(state, params, g);
  EXPECT_EQ(x, Tensor::vector({1.0, 2.0}));
  EXPECT_EQ(state.step_count(), 5u);
}

TEST(Adam, MinimizesQuadratic) {
  Tensor x = Tensor::scalar(1.0);
  AdamState state(AdamConfig{0.1}, {&x});
  std::vector<Tensor*> params{&x};
  for (int i = 0; i < 100; ++i) {
    const std::vector<Tensor> g{Tensor::scalar(2.0 * x[0])};
    adam_step(state, params, g);
  }
  EXPECT_LT(std::abs(x[0]), 0.05);
}

TEST(Adam, ShapeMismatchThrows) {
  Tensor x = Tensor::vector({1.0, 2.0});
  AdamState state(AdamConfig{}, {&x});
  std::vector<Tensor*> params{&x};
  const std::vector<Tensor> wrong{Tensor::vector({1.0})};
  EXPECT_THROW(adam_step(state, params, wrong), ShapeError);
  const std::vector<Tensor> two{Tensor::vector({1.0, 1.0}), Tensor::vector({1.0, 1.0})};
  EXPECT_THROW(adam_step(state, params, two), ShapeError);
}

TEST(Adam, MomentsMatchParameterShapes) {
  Rng rng(1);
  lipnet::LipNet net = lipnet::make_toy_net(rng);
  const auto params = net.parameters();
  AdamState state(AdamConfig{}, std::vector<const Tensor*>(params.begin(), params.end()));
  ASSERT_EQ(state.first_moments().size(), params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    EXPECT_TRUE(state.first_moments()[i].same_shape(*params[i]));
    EXPECT_TRUE(state.second_moments()[i].same_shape(*params[i]));
  }
}

TEST(GradientPenalty, UnitLinearFunctionAwayFromKink) {
  Rng rng(2);
  const lipnet::LipNet net = linear_net(0.6, 0.8, 0.0, lipnet::ConstraintMode::orthonormal);
  const SampleSet t = random_set(rng, 30, 2, 1.0, 2.0);
  const SampleSet f = random_set(rng, 30, 2, 2.0, 4.0);
  EXPECT_NEAR(gradient_penalty(net, t, f, rng), 0.0, 1e-12);
}

TEST(GradientPenalty, ConstantFunctionIsOne) {
  Rng rng(3);
  const lipnet::LipNet net = linear_net(0.0, 0.0, 0.7, lipnet::ConstraintMode::penalized);
  const SampleSet t = random_set(rng, 10, 2, -1.0, 1.0);
  const SampleSet f = random_set(rng, 10, 2, -1.0, 1.0);
  EXPECT_DOUBLE_EQ(gradient_penalty(net, t, f, rng), 1.0);
}

TEST(GradientPenalty, MatchesGradInputRecomputation) {
  Rng rng(4);
  const lipnet::Activation act{lipnet::Activation::Kind::prelu, 2};
  for (int trial = 0; trial < 10; ++trial) {
    const lipnet::LipNet net =
        lipnet::make_dense_net({4, 12, 12, 1}, act, lipnet::OutputHead{lipnet::OutputHead::Kind::huber, 1.0},
                               lipnet::ConstraintMode::penalized, rng);
    const SampleSet t = random_set(rng, 20, 4, -1.0, 1.0);
    const SampleSet f = random_set(rng, 20, 4, 1.0, 3.0);
    PenaltyConfig config;
    config.samples = 40;
    config.fd_step = 1e-6;
    Rng copy = rng;
    const double penalty = gradient_penalty(net, t, f, rng, config);
    const SampleSet x = penalty_interpolates(t, f, config.samples, copy);
    double expected = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double gn = norm(net.grad_input(x.row(i)));
      expected += (gn - 1.0) * (gn - 1.0);
    }
    expected /= static_cast<double>(x.size());
    EXPECT_GE(penalty, 0.0);
    EXPECT_NEAR(penalty, expected, 1e-6 * std::max(1.0, expected));
  }
}

TEST(GradientPenalty, RejectsBadBatches) {
  Rng rng(5);
  const lipnet::LipNet net = linear_net(0.6, 0.8, 0.0, lipnet::ConstraintMode::orthonormal);
  EXPECT_THROW(gradient_penalty(net, SampleSet(2), random_set(rng, 3, 2, 0, 1), rng), ContractError);
  EXPECT_THROW(gradient_penalty(net, random_set(rng, 3, 3, 0, 1), random_set(rng, 3, 2, 0, 1), rng), ShapeError);
}

TEST(EnforceConstraints, OrthonormalNetUnchanged) {
  Rng rng(6);
  const lipnet::LipNet net = lipnet::make_toy_net(rng);
  lipnet::LipNet copy = net;
  enforce_constraints(copy);
  EXPECT_LT(max_param_diff(net, copy), 1e-10);
}

TEST(EnforceConstraints, ScaledLayerRestored) {
  Rng rng(7);
  lipnet::LipNet net = lipnet::make_toy_net(rng);
  const lipnet::LipNet original = net;
  std::get<lipnet::DenseLayer>(net.layers()[2]).weights *= 3.0;
  enforce_constraints(net);
  EXPECT_LT(worst_residual(net), 1e-6);
  EXPECT_LT(max_param_diff(net, original), 1e-8);
}

TEST(EnforceConstraints, ResidualsSmallAfterRandomAdamSteps) {
  Rng rng(8);
  lipnet::LipNet net = lipnet::make_toy_net(rng);
  const auto list = net.parameters();
  AdamState state(AdamConfig{1e-2}, std::vector<const Tensor*>(list.begin(), list.end()));
  for (int step = 0; step < 50; ++step) {
    const auto params = net.parameters();
    std::vector<Tensor> grads;
    for (const Tensor* p : params) {
      Tensor g(p->shape());
      for (double& v : g.values()) v = rng.normal();
      grads.push_back(g);
    }
    adam_step(state, params, grads);
    enforce_constraints(net);
  }
  EXPECT_LT(worst_residual(net), 1e-6);
}

TEST(EnforceConstraints, IdempotentAndClampsSlopes) {
  Rng rng(9);
  lipnet::LipNet net = lipnet::make_ct_net(32, rng);
  net.slopes()[0][0] = 2.5;
  net.slopes()[1][0] = -4.0;
  enforce_constraints(net);
  EXPECT_EQ(net.slopes()[0][0], 1.0);
  EXPECT_EQ(net.slopes()[1][0], -1.0);
  lipnet::LipNet again = net;
  enforce_constraints(again);
  EXPECT_LT(max_param_diff(net, again), 1e-10);

  lipnet::LipNet toy = lipnet::make_toy_net(rng);
  std::get<lipnet::DenseLayer>(toy.layers()[0]).weights *= 1.7;
  enforce_constraints(toy);
  lipnet::LipNet toy2 = toy;
  enforce_constraints(toy2);
  EXPECT_LT(max_param_diff(toy, toy2), 1e-10);
}
