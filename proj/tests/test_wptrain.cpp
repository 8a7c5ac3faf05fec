#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "wpp/errors.hpp"
#include "wpp/lipnet.hpp"
#include "wpp/oracle.hpp"
#include "wpp/problems.hpp"
#include "wpp/wpproject.hpp"
#include "wpp/wptrain.hpp"

using namespace wpp;
using namespace wpp::wptrain;

namespace {

class ZeroEstimator final : public DistanceEstimator {
 public:
  explicit ZeroEstimator(std::size_t dim) : dim_(dim) {}
  std::size_t input_dim() const override { return dim_; }
  double value(std::span<const double>) const override { return 0.0; }
  void evaluate(const SampleSet& batch, std::vector<double>& values, SampleSet* grads) const override {
    values.assign(batch.size(), 0.0);
    if (grads) *grads = SampleSet(batch.size(), dim_);
  }

 private:
  std::size_t dim_;
};

// J(u) = distance from u to a finite point set; nonnegative and 1-Lipschitz.
class CloudDistance final : public DistanceEstimator {
 public:
  explicit CloudDistance(SampleSet cloud) : exact_(oracle::make_point_cloud(std::move(cloud))) {}
  std::size_t input_dim() const override { return exact_.input_dim(); }
  double value(std::span<const double> u) const override { return exact_.value(u); }
  void evaluate(const SampleSet& batch, std::vector<double>& values, SampleSet* grads) const override {
    exact_.evaluate(batch, values, grads);
  }

 private:
  oracle::ExactDistance exact_;
};

SampleSet uniform_set(Rng& rng, std::size_t n, std::size_t dim, double lo, double hi) {
  SampleSet s(n, dim);
  for (double& v : s.data()) v = rng.uniform(lo, hi);
  return s;
}

SampleSet projections(const oracle::AnalyticManifold& m, const SampleSet& s) {
  SampleSet out(s.dim());
  for (std::size_t i = 0; i < s.size(); ++i) out.push_back(oracle::project_analytic(m, s.row(i)));
  return out;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
  ma /= a.size();
  mb /= b.size();
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

const oracle::ExactDistance kFirstCoordinate(oracle::make_half_space({1, 0}, 0));

}  // namespace

TEST(DualLoss, Examples) {
  const SampleSet truth = SampleSet::from_rows({{0, 0}, {-1, 2}});
  const SampleSet fake = SampleSet::from_rows({{1, 0}, {3, 1}});
  EXPECT_DOUBLE_EQ(dual_loss(kFirstCoordinate, truth, fake, 0.0, 2.0), -2.0);
  EXPECT_EQ(dual_loss(ZeroEstimator(2), truth, fake, 0.5, 2.0), 0.0);
  EXPECT_THROW(dual_loss(kFirstCoordinate, SampleSet(2), fake, 0.0, 2.0), ContractError);
}

TEST(DualLoss, TermMatchesValueForNetworks) {
  Rng rng(1);
  const lipnet::LipNet net = lipnet::make_toy_net(rng);
  const lipnet::NetworkEstimator j(net);
  const SampleSet t = uniform_set(rng, 30, 2, -1, 1);
  const SampleSet f = uniform_set(rng, 40, 2, 0, 3);
  ad::Tape tape;
  const auto params = net.bind(tape, false);
  const double term = dual_loss_term(tape, net, params, t, f, 0.3, 2.0).value().item();
  EXPECT_NEAR(term, dual_loss(j, t, f, 0.3, 2.0), 1e-13);
}

TEST(DualLoss, DistanceFunctionIsMinimal) {
  Rng rng(2);
  const auto m = oracle::make_ball({0.3, -0.2}, 1.0);
  const oracle::ExactDistance d(m);
  const SampleSet fake = uniform_set(rng, 200, 2, -3, 3);
  const SampleSet truth = projections(m, fake);
  for (double tau : {0.0, 0.01}) {
    const double base = dual_loss(d, truth, fake, tau, 2.0);
    for (int c = 0; c < 200; ++c) {
      SampleSet cloud = uniform_set(rng, 1 + rng.index(20), 2, -2, 2);
      const CloudDistance f(std::move(cloud));
      EXPECT_GE(dual_loss(f, truth, fake, tau, 2.0), base - 1e-9);
    }
  }
}

TEST(MeanDistanceGap, Examples) {
  const SampleSet truth = SampleSet::from_rows({{0, 0}, {-1, 2}});
  const SampleSet fake = SampleSet::from_rows({{1, 0}, {3, 1}});
  EXPECT_DOUBLE_EQ(mean_distance_gap(kFirstCoordinate, fake, truth), 2.0);
  EXPECT_EQ(mean_distance_gap(kFirstCoordinate, fake, fake), 0.0);
  EXPECT_THROW(mean_distance_gap(kFirstCoordinate, SampleSet(2), truth), ContractError);
}

TEST(MeanDistanceGap, EqualsEmpiricalMeanDistance) {
  Rng rng(3);
  const auto m = oracle::make_segment({0, 0, 0}, {1, 2, 0});
  const oracle::ExactDistance d(m);
  for (int trial = 0; trial < 20; ++trial) {
    const SampleSet fake = uniform_set(rng, 100, 3, -2, 2);
    const SampleSet truth = oracle::sample_manifold(m, 50, rng);
    double mean = 0.0;
    for (std::size_t i = 0; i < fake.size(); ++i) mean += oracle::distance_analytic(m, fake.row(i));
    mean /= fake.size();
    EXPECT_NEAR(mean_distance_gap(d, fake, truth), mean, 1e-12 * mean);
  }
}

TEST(GStep, Examples) {
  Signal g = g_step(Signal{2, 3}, kFirstCoordinate, 0.0, Relaxation{0.0, 1.0});
  EXPECT_EQ(g, (Signal{0, 3}));
  g = g_step(Signal{2, 3}, kFirstCoordinate, 0.0, Relaxation{0.0, 0.0});
  EXPECT_EQ(g, (Signal{2, 3}));
  g = g_step(Signal{2, 3}, kFirstCoordinate, 2.0, Relaxation{0.5, 0.0});
  EXPECT_EQ(g, (Signal{1, 3}));
}

TEST(GStep, StepLengthDecomposition) {
  Rng rng(4);
  const lipnet::LipNet net = lipnet::make_toy_net(rng);
  const lipnet::NetworkEstimator j(net);
  for (int i = 0; i < 200; ++i) {
    const Signal u = uniform_set(rng, 1, 2, -2, 4).signal(0);
    const Relaxation mu{rng.uniform(0, 1), rng.uniform(0, 0.9)};
    const double beta = rng.uniform(0, 2);
    const double lambda = step_size(mu, beta, j.value(u));
    EXPECT_NEAR(distance(g_step(u, j, beta, mu), u), lambda * norm(j.gradient(u)), 1e-13);
  }
}

TEST(GStep, StragglerProperty) {
  const oracle::ExactDistance d(oracle::make_half_space({0, 1}, 0));
  const SampleSet pts = SampleSet::from_rows({{0, 1}, {3, 2}, {-1, 5}});
  const SampleSet mean_only = g_step(pts, d, 0.4, Relaxation{0.5, 0.0});
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_NEAR(distance(mean_only.row(i), pts.row(i)), 0.2, 1e-15);
  const SampleSet pointwise = g_step(pts, d, 0.4, Relaxation{0.5, 0.5});
  EXPECT_LT(distance(pointwise.row(0), pts.row(0)), distance(pointwise.row(1), pts.row(1)));
  EXPECT_LT(distance(pointwise.row(1), pts.row(1)), distance(pointwise.row(2), pts.row(2)));
}

TEST(PushForward, Examples) {
  const SampleSet initial = SampleSet::from_rows({{0, 0}, {1, 1}});
  const SampleSet current = SampleSet::from_rows({{2, 3}, {4, -1}});
  EXPECT_EQ(push_forward(current, initial, 1.0, kFirstCoordinate, 1.0, {0.5, 0.5}), initial);
  EXPECT_EQ(push_forward(current, initial, 0.0, ZeroEstimator(2), 1.0, {0.5, 0.5}), current);
  // g maps (2,3) to (1,3) and (4,-1) to (3,-1) with step mu_1 beta = 1.
  const SampleSet mid = push_forward(current, initial, 0.5, kFirstCoordinate, 2.0, {0.5, 0.0});
  EXPECT_EQ(mid, SampleSet::from_rows({{0.5, 1.5}, {2.0, 0.0}}));
  EXPECT_THROW(push_forward(current, SampleSet::from_rows({{0, 0}}), 0.5, kFirstCoordinate, 1.0, {0.5, 0}),
               ShapeError);
}

TEST(FitStage, ZeroInnerStepsIsIdentity) {
  Rng rng(5);
  const lipnet::LipNet net = lipnet::make_toy_net(rng);
  TrainConfig cfg;
  cfg.inner_steps = 0;
  const SampleSet t = uniform_set(rng, 10, 2, 0, 1);
  const lipnet::LipNet out = fit_stage(net, t, t, cfg, rng);
  const auto a = net.parameters(), b = out.parameters();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i], *b[i]);
}

TEST(FitStage, LearnsHalfSpaceDistance) {
  Rng rng(6);
  const auto m = oracle::make_half_space({0.6, 0.8}, 0.0);
  const SampleSet fake = [&] {
    SampleSet s(2);
    while (s.size() < 200) {
      const Signal u = uniform_set(rng, 1, 2, -1, 3).signal(0);
      if (oracle::distance_analytic(m, u) > 0) s.push_back(u);
    }
    return s;
  }();
  const SampleSet truth = projections(m, fake);
  TrainConfig cfg;
  cfg.inner_steps = 500;
  cfg.adam.lr = 1e-3;
  cfg.tau = 1.0;
  cfg.p = 1.0;
  std::vector<double> losses;
  const lipnet::LipNet net = fit_stage(lipnet::make_toy_net(rng), truth, fake, cfg, rng, &losses);
  ASSERT_EQ(losses.size(), 500u);
  const lipnet::NetworkEstimator j(net);
  std::vector<double> learned, exact;
  for (std::size_t i = 0; i < fake.size(); ++i) {
    learned.push_back(j.value(fake.row(i)));
    exact.push_back(oracle::distance_analytic(m, fake.row(i)));
  }
  EXPECT_GT(pearson(learned, exact), 0.9);
  // Full-batch loss, averaged over consecutive 10-step windows.
  double previous = INFINITY;
  for (std::size_t w = 0; w + 10 <= losses.size(); w += 10) {
    double avg = 0.0;
    for (std::size_t s = w; s < w + 10; ++s) avg += losses[s] / 10.0;
    EXPECT_LE(avg, previous + 1e-4) << "window " << w;
    previous = avg;
  }
}

TEST(Train, ZeroStagesGivesEmptySchedule) {
  Rng rng(7);
  TrainConfig cfg;
  cfg.stages = 0;
  const SampleSet init = uniform_set(rng, 20, 2, 0, 1);
  const auto result = train(cfg, init, init, lipnet::make_toy_net(rng));
  EXPECT_TRUE(result.schedule.stages.empty());
  EXPECT_EQ(result.schedule.input_dim, 2u);
  EXPECT_EQ(wp_project(result.schedule, Signal{0.3, 0.7}), (Signal{0.3, 0.7}));
}

TEST(Train, RejectsInvalidRelaxation) {
  Rng rng(8);
  TrainConfig cfg;
  cfg.mu = {1.5, 0.6};
  const SampleSet init = uniform_set(rng, 20, 2, 0, 1);
  EXPECT_THROW(train(cfg, init, init, lipnet::make_toy_net(rng)), ConfigError);
  cfg.mu = {0.0, 0.0};
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg.mu = {-0.1, 0.5};
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg.mu = {0.5, 0.0};
  cfg.gamma_coefficient = 1.5;
  EXPECT_THROW(validate(cfg), ConfigError);
  try {
    validate_relaxation({1.5, 0.6});
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("simplex"), std::string::npos);
  }
}

TEST(Train, ToyBetaDecreases) {
  Rng rng(9);
  const auto data = problems::toy_dataset(rng);
  TrainConfig cfg;
  cfg.mu = {0.25, 0.5};
  cfg.tau = 10.0;
  cfg.p = 1.0;
  cfg.adam.lr = 1e-3;
  cfg.seed = 9;
  std::vector<StageLog> seen;
  const auto result = train(cfg, data.initial, data.truth, lipnet::make_toy_net(rng),
                            [&](const StageLog& s) { seen.push_back(s); });
  ASSERT_EQ(result.schedule.stages.size(), 20u);
  ASSERT_EQ(seen.size(), 20u);
  EXPECT_LT(result.log.back().beta, result.log.front().beta / 2);
  for (std::size_t k = 0; k < 20; ++k) {
    EXPECT_DOUBLE_EQ(result.schedule.stages[k].gamma, 0.1 / static_cast<double>(k + 1));
    EXPECT_TRUE(std::isfinite(result.schedule.stages[k].beta));
    EXPECT_LE(result.log[k].grad_norm, 1.0 + 1e-3);
  }
}

TEST(SmoothSamples, Examples) {
  Rng rng(10);
  const SampleSet s = uniform_set(rng, 100, 3, 0, 1);
  EXPECT_EQ(smooth_samples(s, 0.0, rng), s);
  Rng a(11), b(11);
  EXPECT_EQ(smooth_samples(s, 0.1, a), smooth_samples(s, 0.1, b));
  EXPECT_THROW(smooth_samples(s, -1.0, rng), ContractError);
}

TEST(SmoothSamples, EmpiricalStd) {
  Rng rng(12);
  const SampleSet zeros(10000, 2);
  const SampleSet noisy = smooth_samples(zeros, 0.05, rng);
  for (std::size_t c = 0; c < 2; ++c) {
    double ss = 0.0;
    for (std::size_t i = 0; i < noisy.size(); ++i) ss += noisy.row(i)[c] * noisy.row(i)[c];
    EXPECT_NEAR(std::sqrt(ss / noisy.size()), 0.05, 0.005);
  }
}

TEST(GradNormMonitor, Examples) {
  Rng rng(13);
  const auto m = oracle::make_ball({0, 0}, 1.0);
  SampleSet off(2);
  while (off.size() < 500) {
    const Signal u = uniform_set(rng, 1, 2, -3, 3).signal(0);
    if (norm(u) > 1.0 + 1e-6) off.push_back(u);
  }
  EXPECT_NEAR(grad_norm_monitor(*oracle::exact_distance_stage(m), off), 1.0, 1e-12);
  EXPECT_EQ(grad_norm_monitor(ZeroEstimator(2), off), 0.0);
}
