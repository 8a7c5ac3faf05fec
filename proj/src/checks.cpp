#include "wpp/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>

#include "wpp/errors.hpp"
#include "wpp/lipnet.hpp"
#include "wpp/oracle.hpp"
#include "wpp/problems.hpp"
#include "wpp/wpproject.hpp"
#include "wpp/wptrain.hpp"

namespace wpp::checks {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string format(const char* fmt, ...) {
  char buf[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, args);
  va_end(args);
  return buf;
}

CheckResult timed(const std::string& name, const std::function<void(CheckResult&)>& body) {
  CheckResult r;
  r.name = name;
  const auto t0 = Clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = seconds_since(t0);
  return r;
}

/// Value-only estimator wrapping a callable.
class FunctionEstimator final : public DistanceEstimator {
 public:
  FunctionEstimator(std::size_t dim, std::function<double(std::span<const double>)> f) : dim_(dim), f_(std::move(f)) {}
  std::size_t input_dim() const override { return dim_; }
  double value(std::span<const double> u) const override { return f_(u); }
  void evaluate(const SampleSet& batch, std::vector<double>& values, SampleSet* grads) const override {
    if (grads) throw ContractError("FunctionEstimator has no gradients");
    values.resize(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) values[i] = f_(batch.row(i));
  }

 private:
  std::size_t dim_;
  std::function<double(std::span<const double>)> f_;
};

Signal random_point(Rng& rng, std::size_t dim, double lo, double hi) {
  Signal u(dim);
  for (double& v : u) v = rng.uniform(lo, hi);
  return u;
}

Signal random_unit(Rng& rng, std::size_t dim) {
  Signal w(dim);
  double n = 0.0;
  while (n < 1e-3) {
    for (double& v : w) v = rng.normal();
    n = norm(w);
  }
  for (double& v : w) v /= n;
  return w;
}

SampleSet uniform_set(Rng& rng, std::size_t n, std::size_t dim, double lo, double hi) {
  SampleSet s(n, dim);
  for (double& v : s.data()) v = rng.uniform(lo, hi);
  return s;
}

oracle::AnalyticManifold random_convex(Rng& rng, int kind, std::size_t dim) {
  switch (kind) {
    case 0:
      return oracle::make_ball(random_point(rng, dim, -1.0, 1.0), rng.uniform(0.3, 1.0));
    case 1:
      return oracle::make_half_space(random_unit(rng, dim), rng.uniform(-0.5, 0.5));
    default: {
      Signal a = random_point(rng, dim, -1.5, 1.5);
      Signal b = axpy(a, rng.uniform(0.5, 2.0), random_unit(rng, dim));
      return oracle::make_segment(std::move(a), std::move(b));
    }
  }
}

/// Same kind as m, moved by `shift`.
oracle::AnalyticManifold shifted(const oracle::AnalyticManifold& m, std::span<const double> shift) {
  return std::visit(
      [&](const auto& s) -> oracle::AnalyticManifold {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, oracle::Ball>) {
          return oracle::make_ball(axpy(s.center, 1.0, shift), s.radius);
        } else if constexpr (std::is_same_v<T, oracle::HalfSpace>) {
          return oracle::make_half_space(s.normal, s.offset + dot(s.normal, shift));
        } else if constexpr (std::is_same_v<T, oracle::Segment>) {
          return oracle::make_segment(axpy(s.a, 1.0, shift), axpy(s.b, 1.0, shift));
        } else {
          throw ContractError("shifted: unsupported manifold");
        }
      },
      m);
}

/// A random nonnegative 1-Lipschitz function built around m.
std::shared_ptr<const DistanceEstimator> random_candidate(Rng& rng, const oracle::AnalyticManifold& m, std::size_t dim,
                                                          std::size_t index) {
  auto dist = [m](std::span<const double> u) { return oracle::distance_analytic(m, u); };
  switch (index % 7) {
    case 0: {
      const double a = rng.uniform(0.0, 1.0), b = rng.uniform(0.0, 0.5);
      return std::make_shared<FunctionEstimator>(dim, [=](std::span<const double> u) { return a * dist(u) + b; });
    }
    case 1: {
      const double c = rng.uniform(0.05, 2.0);
      return std::make_shared<FunctionEstimator>(dim, [=](std::span<const double> u) { return std::min(dist(u), c); });
    }
    case 2: {
      const double e = rng.uniform(0.0, 0.3);
      return std::make_shared<FunctionEstimator>(dim,
                                                 [=](std::span<const double> u) { return std::max(dist(u) - e, 0.0); });
    }
    case 3: {
      auto cloud = oracle::make_point_cloud(uniform_set(rng, 1 + rng.index(20), dim, -3.0, 3.0));
      return std::make_shared<FunctionEstimator>(
          dim, [cloud](std::span<const double> u) { return oracle::distance_analytic(cloud, u); });
    }
    case 4: {
      Signal w = random_unit(rng, dim);
      const double s = rng.uniform(0.0, 1.0), c = rng.uniform(-1.0, 1.0);
      for (double& v : w) v *= s;
      return std::make_shared<FunctionEstimator>(dim,
                                                 [=](std::span<const double> u) { return std::max(0.0, dot(w, u) + c); });
    }
    case 5: {
      Signal shift = random_point(rng, dim, -0.3, 0.3);
      auto other = shifted(m, shift);
      return std::make_shared<FunctionEstimator>(
          dim, [other](std::span<const double> u) { return oracle::distance_analytic(other, u); });
    }
    default: {
      Rng net_rng = rng.derive(index);
      auto layers = std::vector<std::size_t>{dim, 8, 8, 1};
      return std::make_shared<lipnet::NetworkEstimator>(
          lipnet::make_dense_net(layers, {lipnet::Activation::Kind::groupsort, 2}, {lipnet::OutputHead::Kind::abs, 1.0},
                                 lipnet::ConstraintMode::orthonormal, net_rng));
    }
  }
}

double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

/// 10x10 input, two small stride-2 convolutions, two dense layers, PReLU, Huber head.
lipnet::LipNet small_conv_net(Rng& rng) {
  auto uniform = [&](Tensor::Shape shape, double bound) {
    Tensor t(shape);
    for (double& v : t.values()) v = rng.uniform(-bound, bound);
    return t;
  };
  std::vector<lipnet::Layer> layers;
  lipnet::ConvLayer c1;
  c1.kernels = uniform({3, 1, 4, 4}, 0.5);
  c1.bias = uniform({3}, 0.5);
  c1.in_height = c1.in_width = 10;
  lipnet::ConvLayer c2;
  c2.kernels = uniform({2, 3, 2, 2}, 0.5);
  c2.bias = uniform({2}, 0.5);
  c2.in_height = c2.in_width = c1.out_height();
  const std::size_t flat = c2.out_size();
  lipnet::DenseLayer d1{uniform({5, flat}, 0.5), uniform({5}, 0.5), lipnet::ConstraintMode::penalized};
  lipnet::DenseLayer d2{uniform({1, 5}, 0.5), uniform({1}, 0.5), lipnet::ConstraintMode::penalized};
  layers.emplace_back(std::move(c1));
  layers.emplace_back(std::move(c2));
  layers.emplace_back(std::move(d1));
  layers.emplace_back(std::move(d2));
  lipnet::LipNet net(100, std::move(layers), {lipnet::Activation::Kind::prelu, 0},
                     {lipnet::OutputHead::Kind::huber, rng.uniform(0.2, 2.0)});
  for (Tensor& s : net.slopes()) s = Tensor::scalar(rng.uniform(-1.0, 1.0));
  return net;
}

lipnet::LipNet random_dense_net(Rng& rng) {
  const bool prelu = rng.uniform01() < 0.5;
  std::vector<std::size_t> dims{2 + rng.index(4)};
  const std::size_t hidden = 1 + rng.index(3);
  for (std::size_t i = 0; i < hidden; ++i) dims.push_back(2 * (1 + rng.index(4)));
  dims.push_back(1);
  lipnet::Activation act{prelu ? lipnet::Activation::Kind::prelu : lipnet::Activation::Kind::groupsort, 2};
  lipnet::OutputHead head{rng.uniform01() < 0.5 ? lipnet::OutputHead::Kind::abs : lipnet::OutputHead::Kind::huber,
                          rng.uniform(0.2, 2.0)};
  auto net = lipnet::make_dense_net(dims, act, head, lipnet::ConstraintMode::penalized, rng);
  for (Tensor& s : net.slopes()) s = Tensor::scalar(rng.uniform(-1.0, 1.0));
  return net;
}

}  // namespace

CheckResult check_minimality(std::uint64_t seed, std::size_t candidates) {
  return timed("dual minimality", [&](CheckResult& r) {
    Rng rng(seed);
    bool ok = true;
    double worst_margin = std::numeric_limits<double>::infinity();
    double worst_strict = std::numeric_limits<double>::infinity();
    std::size_t strict_count = 0;
    for (int kind = 0; kind < 3; ++kind) {
      const std::size_t dim = 2 + static_cast<std::size_t>(kind % 2);
      const auto m = random_convex(rng, kind, dim);
      const SampleSet fake = uniform_set(rng, 200, dim, -3.0, 3.0);
      SampleSet truth(dim);
      for (std::size_t i = 0; i < fake.size(); ++i) truth.push_back(oracle::project_analytic(m, fake.row(i)));
      const oracle::ExactDistance exact(m);
      const double ref0 = wptrain::dual_loss(exact, truth, fake, 0.0, 2.0);
      const double ref1 = wptrain::dual_loss(exact, truth, fake, 0.01, 2.0);
      for (std::size_t c = 0; c < candidates; ++c) {
        const auto f = random_candidate(rng, m, dim, c);
        const double l0 = wptrain::dual_loss(*f, truth, fake, 0.0, 2.0);
        worst_margin = std::min(worst_margin, l0 - ref0);
        if (l0 < ref0 - 1e-9) ok = false;
        double differs = 0.0;
        for (std::size_t i = 0; i < fake.size(); ++i)
          differs = std::max(differs, std::abs(f->value(fake.row(i)) - exact.value(fake.row(i))));
        if (differs > 1e-3) {
          ++strict_count;
          const double l1 = wptrain::dual_loss(*f, truth, fake, 0.01, 2.0);
          worst_strict = std::min(worst_strict, l1 - ref1);
          if (!(l1 > ref1)) ok = false;
        }
      }
    }
    r.passed = ok;
    r.detail = format("min L(f)-L(d) tau=0: %.3e; min strict gap tau=0.01: %.3e over %zu candidates", worst_margin,
                      worst_strict, strict_count);
  });
}

CheckResult check_halpern_convergence(std::uint64_t seed, std::size_t starts, std::size_t steps) {
  return timed("halpern convergence", [&](CheckResult& r) {
    Rng rng(seed);
    bool ok = true;
    std::string detail;
    for (int kind = 0; kind < 3; ++kind) {
      const std::size_t dim = 2;
      const auto m = random_convex(rng, kind, dim);
      const SampleSet u1 = uniform_set(rng, starts, dim, -3.0, 3.0);
      const SampleSet truth = oracle::sample_manifold(m, 200, rng);
      wptrain::TrainConfig cfg;
      cfg.mu = {0.5, 0.5};
      cfg.gamma_coefficient = 1.0;
      cfg.stages = steps;
      cfg.noise_rel = 0.0;
      cfg.seed = seed;
      const auto stage = oracle::exact_distance_stage(m);
      const auto result = wptrain::train_with(cfg, u1, truth,
                                              [&](std::size_t, const SampleSet&, const SampleSet&, Rng&) { return stage; });
      std::vector<double> err(steps + 1, 0.0);
      double consistency = 0.0;
      for (std::size_t i = 0; i < starts; ++i) {
        const Signal target = oracle::project_analytic(m, u1.row(i));
        const auto traj = wp_trajectory(result.schedule, u1.row(i));
        for (std::size_t k = 0; k < traj.size(); ++k) {
          const double e = distance(traj[k], target);
          err[k] += e * e / static_cast<double>(starts);
        }
        consistency = std::max(consistency, distance(traj.back(), result.final_set.row(i)));
      }
      // err[k - 1] is the mean squared error of u^k.
      std::size_t first = 0;
      for (std::size_t k = 1; k <= steps; ++k)
        if (err[k - 1] < 1e-4) {
          first = k;
          break;
        }
      const double at_end = err[steps - 1];
      if (!(at_end < 1e-4) || consistency > 1e-12) ok = false;
      if (!detail.empty()) detail += "; ";
      detail += format("%s: mse(u^%zu)=%.2e first<1e-4 at k=%zu", oracle::kind_name(m), steps, at_end, first);
    }
    r.passed = ok;
    r.detail = detail;
  });
}

CheckResult check_mean_distance(std::uint64_t seed, std::size_t sets) {
  return timed("mean distance identity", [&](CheckResult& r) {
    Rng rng(seed);
    double worst = 0.0;
    for (std::size_t s = 0; s < sets; ++s) {
      oracle::AnalyticManifold m = oracle::make_half_circle({2.0, 0.0}, 0.75);
      switch (s % 5) {
        case 1:
        case 2:
        case 3:
          m = random_convex(rng, static_cast<int>(s % 5) - 1, 2 + s % 3);
          break;
        case 4:
          m = oracle::make_point_cloud(uniform_set(rng, 5 + rng.index(30), 2, -2.0, 2.0));
          break;
        default:
          break;
      }
      const std::size_t dim = oracle::manifold_dim(m);
      const SampleSet fake = uniform_set(rng, 10 + rng.index(300), dim, -3.0, 3.0);
      const SampleSet truth = oracle::sample_manifold(m, 10 + rng.index(100), rng);
      long double sf = 0.0L, st = 0.0L;
      for (std::size_t i = 0; i < fake.size(); ++i) sf += oracle::distance_analytic(m, fake.row(i));
      for (std::size_t i = 0; i < truth.size(); ++i) st += oracle::distance_analytic(m, truth.row(i));
      const long double reference = sf / fake.size() - st / truth.size();
      const double gap = wptrain::mean_distance_gap(oracle::ExactDistance(m), fake, truth);
      const double rel = static_cast<double>(std::abs(gap - reference) / std::max(std::abs(reference), 1e-300L));
      worst = std::max(worst, rel);
    }
    r.passed = worst <= 1e-12;
    r.detail = format("max relative error %.3e over %zu sets", worst, sets);
  });
}

CheckResult check_lipschitz(std::uint64_t seed) {
  return timed("lipschitz certificate", [&](CheckResult& r) {
    Rng rng(seed);
    auto cfg = experiment::preset_config(experiment::Preset::toy).train;
    const auto data = problems::toy_dataset(rng, 500, 50);
    lipnet::LipNet net = lipnet::make_toy_net(rng);
    const lipnet::Box box{{-1.0, -2.0}, {4.0, 3.0}};
    double worst = 0.0;
    std::size_t done = 0;
    for (std::size_t checkpoint : {0, 1, 2, 5, 10, 20, 50, 100, 200, 500, 1000}) {
      if (checkpoint > done) {
        cfg.inner_steps = checkpoint - done;
        net = wptrain::fit_stage(std::move(net), data.truth, data.initial, cfg, rng);
        done = checkpoint;
      }
      worst = std::max(worst, lipnet::lipschitz_audit(lipnet::NetworkEstimator(net), rng, 10000, box));
    }
    double monitor_error = 0.0;
    const oracle::AnalyticManifold manifolds[] = {
        oracle::make_half_circle({2.0, 0.0}, 0.75), random_convex(rng, 0, 2), random_convex(rng, 1, 3),
        random_convex(rng, 2, 2), oracle::make_point_cloud(uniform_set(rng, 20, 2, -1.0, 1.0))};
    for (const auto& m : manifolds) {
      const std::size_t dim = oracle::manifold_dim(m);
      SampleSet off(dim);
      while (off.size() < 500) {
        const Signal u = random_point(rng, dim, -3.0, 3.0);
        if (m.index() == 0 && distance(u, std::get<oracle::HalfCircle>(m).center) < 1e-6) continue;
        if (oracle::distance_analytic(m, u) > 1e-6) off.push_back(u);
      }
      monitor_error = std::max(monitor_error, std::abs(wptrain::grad_norm_monitor(oracle::ExactDistance(m), off) - 1.0));
    }
    r.passed = worst <= 1.0 + 1e-6 && monitor_error <= 1e-9;
    r.detail = format("max audit ratio %.12f over 11 checkpoints (0..1000 steps); |monitor-1| = %.2e", worst,
                      monitor_error);
  });
}

CheckResult check_gradients(std::uint64_t seed, std::size_t configurations) {
  return timed("gradient correctness", [&](CheckResult& r) {
    Rng rng(seed);
    const double h = 1e-6;
    double worst_input = 0.0, worst_param = 0.0;
    for (std::size_t c = 0; c < configurations; ++c) {
      lipnet::LipNet net;
      double lo = 0.0, hi = 1.0;
      switch (c % 4) {
        case 0:
        case 1:
          net = lipnet::make_toy_net(rng);
          lo = -0.5;
          hi = 3.0;
          break;
        case 2:
          net = random_dense_net(rng);
          lo = -2.0;
          hi = 2.0;
          break;
        default:
          net = small_conv_net(rng);
          break;
      }
      const std::size_t dim = net.input_dim();
      const Signal u = random_point(rng, dim, lo, hi);
      const Signal g = net.grad_input(u);
      const Signal g_fd = finite_diff_grad([&](std::span<const double> x) { return net.forward(x); }, u, h);
      worst_input = std::max(worst_input, relative_error(g, g_fd));

      const SampleSet tb = uniform_set(rng, 6, dim, lo, hi), fb = uniform_set(rng, 6, dim, lo, hi);
      const double tau = (c % 3 == 0) ? 0.0 : 0.01;
      const double p = (c % 2 == 0) ? 2.0 : 1.5;
      ad::Tape tape;
      const auto params = net.bind(tape, true);
      tape.backward(wptrain::dual_loss_term(tape, net, params, tb, fb, tau, p));
      Signal ad_grad, fd_grad;
      for (const ad::Var& v : params.vars) {
        const Tensor gt = tape.grad(v);
        ad_grad.insert(ad_grad.end(), gt.values().begin(), gt.values().end());
      }
      lipnet::LipNet probe = net;
      const auto loss = [&]() { return wptrain::dual_loss(lipnet::NetworkEstimator(probe), tb, fb, tau, p); };
      for (Tensor* t : probe.parameters()) {
        for (double& x : t->values()) {
          const double saved = x;
          x = saved + h;
          const double up = loss();
          x = saved - h;
          const double down = loss();
          x = saved;
          fd_grad.push_back((up - down) / (2.0 * h));
        }
      }
      worst_param = std::max(worst_param, relative_error(ad_grad, fd_grad));
    }
    r.passed = worst_input < 1e-5 && worst_param < 1e-5;
    r.detail = format("max relative error: grad_u %.2e, grad_theta %.2e over %zu configurations", worst_input,
                      worst_param, configurations);
  });
}

CheckResult check_straggler() {
  return timed("straggler property", [&](CheckResult& r) {
    Rng rng(17);
    const auto m = oracle::make_half_space({0.0, 1.0}, 0.0);
    const oracle::ExactDistance exact(m);
    SampleSet points(2);
    points.push_back(Signal{0.0, 1.0});
    points.push_back(Signal{0.5, 3.0});
    for (int i = 0; i < 50; ++i) points.push_back(Signal{rng.uniform(-2.0, 2.0), rng.uniform(0.1, 4.0)});
    const SampleSet truth = oracle::sample_manifold(m, 100, rng);
    const double beta = wptrain::mean_distance_gap(exact, points, truth);

    const auto moved = [&](const Relaxation& mu) {
      const SampleSet next = wptrain::push_forward(points, points, 0.0, exact, beta, mu);
      std::vector<double> d(points.size());
      for (std::size_t i = 0; i < points.size(); ++i) d[i] = distance(points.row(i), next.row(i));
      return d;
    };
    const auto mean_only = moved({0.5, 0.0});
    double deviation = 0.0;
    for (double d : mean_only) deviation = std::max(deviation, std::abs(d - 0.5 * beta));
    const auto mixed = moved({0.25, 0.25});
    r.passed = deviation <= 1e-12 && mixed[1] > mixed[0];
    r.detail = format("beta %.6f; mu=(0.5,0) max |step-0.5beta| %.2e; mu=(0.25,0.25) steps d=1: %.6f d=3: %.6f", beta,
                      deviation, mixed[0], mixed[1]);
  });
}

CheckResult check_solver_agreement() {
  return timed("solver cross-validation", [&](CheckResult& r) {
    const experiment::ToyProblem p;
    solvers::SolverConfig cfg;
    cfg.iterations = 3000;
    const solvers::Projector proj = [&](std::span<const double> u) { return oracle::project_analytic(p.manifold, u); };
    const Signal a = solvers::relaxed_projected_gradient(p.a, p.d, p.z1, cfg, proj).back().z;
    const Signal b = solvers::pdhg(p.a, p.d, p.z1, cfg, proj).back().z;
    const Signal c = solvers::linearized_admm(p.a, p.d, p.z1, cfg, proj).back().z;
    const double spread = std::max({distance(a, b), distance(a, c), distance(b, c)});
    const Signal best = experiment::toy_constrained_minimizer(p);
    r.passed = spread <= 1e-3;
    r.detail = format("rpg (%.6f, %.6f) pdhg (%.6f, %.6f) ladmm (%.6f, %.6f); spread %.2e; arc minimizer (%.6f, %.6f)",
                      a[0], a[1], b[0], b[1], c[0], c[1], spread, best[0], best[1]);
  });
}

CheckResult check_adjoint(const solvers::LinearOperator& a, const std::string& label, std::uint64_t seed) {
  return timed(label + " adjoint test", [&](CheckResult& r) {
    Rng rng(seed);
    const double err = solvers::adjoint_test(a, rng, 20);
    r.passed = err < 1e-8;
    r.detail = format("max relative mismatch %.2e (%zu x %zu)", err, a.output_dim(), a.input_dim());
  });
}

CheckResult check_radon_adjoint() { return check_adjoint(problems::radon_build({}, 32), "radon"); }

solvers::FunctionOperator wrong_adjoint_radon() {
  auto a = std::make_shared<solvers::SparseOperator>(problems::radon_build({}, 32));
  return solvers::FunctionOperator(
      a->input_dim(), a->output_dim(), [a](std::span<const double> x) { return a->apply(x); },
      [a](std::span<const double> y) {
        Signal out = a->adjoint(y);
        for (std::size_t i = 0; i < out.size(); i += 2) out[i] *= 1.01;
        return out;
      });
}

CheckResult check_toy_convergence(const experiment::ExperimentConfig& config) {
  return timed("toy convergence", [&](CheckResult& r) {
    const auto t0 = Clock::now();
    const auto trained = experiment::train_experiment(config);
    const double train_s = seconds_since(t0);
    const auto t1 = Clock::now();
    const auto solve = experiment::solve_toy(config, trained.schedule);
    const double solve_s = seconds_since(t1);
    const Signal& za = solve.analytic.back().z;
    const Signal& zw = solve.learned.back().z;
    r.passed = solve.endpoint_gap < 0.05 && solve.analytic_error < 0.05 && solve.learned_error < 0.05 &&
               train_s < 600.0 && solve_s < 60.0;
    r.detail = format("analytic (%.4f, %.4f) wp (%.4f, %.4f) gap %.4f; to minimizer %.4f / %.4f; train %.1fs solve %.2fs",
                      za[0], za[1], zw[0], zw[1], solve.endpoint_gap, solve.analytic_error, solve.learned_error,
                      train_s, solve_s);
  });
}

CheckResult check_ct_study(const experiment::ExperimentConfig& config) {
  return timed("scaled CT study", [&](CheckResult& r) {
    const auto t0 = Clock::now();
    const auto data = experiment::make_ct_data(config);
    const auto trained = experiment::train_on(config, data.initial, data.truth);
    const auto m = experiment::evaluate_ct(config, data, trained.schedule);
    const double total_s = seconds_since(t0);
    r.passed = m.wp_psnr >= m.tv_psnr + 1.0 && m.wp_ssim > m.tv_ssim && total_s < 2700.0;
    r.detail = format("TV %.2f dB / SSIM %.4f; WP %.2f dB / SSIM %.4f (tv weight %.1e); total %.0fs", m.tv_psnr, m.tv_ssim,
                      m.wp_psnr, m.wp_ssim, data.tv_weight, total_s);
  });
}

std::vector<CheckResult> invariant_suite(bool inject_wrong_adjoint) {
  std::vector<CheckResult> out;
  out.push_back(check_minimality());
  out.push_back(check_halpern_convergence());
  out.push_back(check_mean_distance());
  out.push_back(check_lipschitz());
  out.push_back(check_gradients());
  out.push_back(check_straggler());
  out.push_back(check_solver_agreement());
  if (inject_wrong_adjoint)
    out.push_back(check_adjoint(wrong_adjoint_radon(), "radon"));
  else
    out.push_back(check_radon_adjoint());
  return out;
}

}  // namespace wpp::checks
