#include "wpp/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <string>

#include "wpp/errors.hpp"

namespace wpp::solvers {
namespace {

void check_problem(const LinearOperator& a, std::span<const double> d, std::span<const double> z1) {
  if (d.size() != a.output_dim() || z1.size() != a.input_dim()) {
    throw ShapeError("solver: operator is " + std::to_string(a.output_dim()) + "x" + std::to_string(a.input_dim()) +
                     ", data has " + std::to_string(d.size()) + " entries, start has " + std::to_string(z1.size()));
  }
}

Signal sub(std::span<const double> a, std::span<const double> b) {
  Signal out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Signal gradient_step(const LinearOperator& a, std::span<const double> d, std::span<const double> z, double xi) {
  const Signal g = a.adjoint(sub(a.apply(z), d));
  return axpy(z, -xi, g);
}

Iterate make_iterate(const LinearOperator& a, std::span<const double> d, Signal z, double xi, const Projector& p) {
  Iterate it;
  it.objective = objective(a, d, z);
  it.residual = fixed_point_residual(a, d, z, xi, p);
  it.z = std::move(z);
  for (double v : it.z)
    if (!std::isfinite(v)) throw NumericalError("solver: iterate became non-finite");
  return it;
}

double operator_norm(const LinearOperator& a) { return std::sqrt(power_method_norm(a, 200)); }

}  // namespace

DenseOperator::DenseOperator(Tensor a) : a_(std::move(a)) {
  if (a_.rank() != 2) throw ShapeError("DenseOperator: matrix must be rank 2, got " + shape_string(a_.shape()));
}

Signal DenseOperator::apply(std::span<const double> x) const {
  if (x.size() != input_dim()) throw ShapeError("DenseOperator::apply: dimension mismatch");
  Signal out(output_dim(), 0.0);
  for (std::size_t r = 0; r < out.size(); ++r)
    for (std::size_t c = 0; c < x.size(); ++c) out[r] += a_.at(r, c) * x[c];
  return out;
}

Signal DenseOperator::adjoint(std::span<const double> y) const {
  if (y.size() != output_dim()) throw ShapeError("DenseOperator::adjoint: dimension mismatch");
  Signal out(input_dim(), 0.0);
  for (std::size_t r = 0; r < y.size(); ++r)
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += a_.at(r, c) * y[r];
  return out;
}

SparseOperator::SparseOperator(std::size_t rows, std::size_t cols, std::vector<Triplet> entries)
    : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {
  for (const Triplet& t : entries)
    if (t.row >= rows || t.col >= cols) throw ShapeError("SparseOperator: entry out of range");
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Triplet& a, const Triplet& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
  // Duplicates are summed.
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const Triplet& t = entries[i];
    if (i > 0 && entries[i - 1].row == t.row && entries[i - 1].col == t.col) {
      values_.back() += t.value;
      continue;
    }
    col_idx_.push_back(t.col);
    values_.push_back(t.value);
    ++row_ptr_[t.row + 1];
  }
  for (std::size_t r = 1; r <= rows_; ++r) row_ptr_[r] += row_ptr_[r - 1];
}

Signal SparseOperator::apply(std::span<const double> x) const {
  if (x.size() != cols_) throw ShapeError("SparseOperator::apply: dimension mismatch");
  Signal out(rows_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r) {
    double s = 0.0;
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += values_[k] * x[col_idx_[k]];
    out[r] = s;
  }
  return out;
}

Signal SparseOperator::adjoint(std::span<const double> y) const {
  if (y.size() != rows_) throw ShapeError("SparseOperator::adjoint: dimension mismatch");
  Signal out(cols_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) out[col_idx_[k]] += values_[k] * y[r];
  return out;
}

std::vector<std::pair<std::size_t, double>> SparseOperator::row_entries(std::size_t r) const {
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t k = row_ptr_.at(r); k < row_ptr_.at(r + 1); ++k) out.emplace_back(col_idx_[k], values_[k]);
  return out;
}

void validate(const SolverConfig& c) {
  if (!(c.kappa > 0.0 && c.kappa <= 1.0)) throw ConfigError("kappa must lie in (0, 1]");
  if (!(c.xi > 0.0)) throw ConfigError("xi must be > 0");
  for (const auto& s : {c.pdhg_beta, c.pdhg_gamma, c.ladmm_beta, c.ladmm_gamma})
    if (s && !(*s > 0.0)) throw ConfigError("solver step sizes must be > 0");
}

double objective(const LinearOperator& a, std::span<const double> d, std::span<const double> z) {
  const Signal r = sub(a.apply(z), d);
  return 0.5 * dot(r, r);
}

double fixed_point_residual(const LinearOperator& a, std::span<const double> d, std::span<const double> z,
                            double xi, const Projector& projector) {
  return distance(z, projector(gradient_step(a, d, z, xi)));
}

Signal prox_quadratic(std::span<const double> y, double gamma, std::span<const double> d) {
  if (!(gamma > 0.0)) throw ContractError("prox_quadratic: gamma must be > 0");
  if (y.size() != d.size()) throw ShapeError("prox_quadratic: dimension mismatch");
  Signal out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = (y[i] + gamma * d[i]) / (1.0 + gamma);
  return out;
}

Signal prox_conjugate(std::span<const double> v, double beta, std::span<const double> d) {
  if (!(beta > 0.0)) throw ContractError("prox_conjugate: beta must be > 0");
  if (v.size() != d.size()) throw ShapeError("prox_conjugate: dimension mismatch");
  Signal out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - beta * d[i]) / (1.0 + beta);
  return out;
}

Signal prox_conjugate_moreau(std::span<const double> v, double beta, std::span<const double> d) {
  Signal scaled(v.begin(), v.end());
  for (double& x : scaled) x /= beta;
  const Signal p = prox_quadratic(scaled, 1.0 / beta, d);
  return axpy(v, -beta, p);
}

Trajectory relaxed_projected_gradient(const LinearOperator& a, std::span<const double> d,
                                      std::span<const double> z1, const SolverConfig& config,
                                      const Projector& projector) {
  validate(config);
  check_problem(a, d, z1);
  Trajectory traj;
  traj.push_back(make_iterate(a, d, Signal(z1.begin(), z1.end()), config.xi, projector));
  for (std::size_t t = 0; t < config.iterations; ++t) {
    const Signal& z = traj.back().z;
    const Signal p = projector(gradient_step(a, d, z, config.xi));
    Signal next(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) next[i] = (1.0 - config.kappa) * z[i] + config.kappa * p[i];
    traj.push_back(make_iterate(a, d, std::move(next), config.xi, projector));
  }
  return traj;
}

Trajectory pdhg(const LinearOperator& a, std::span<const double> d, std::span<const double> z1,
                const SolverConfig& config, const Projector& projector) {
  validate(config);
  check_problem(a, d, z1);
  double beta = config.pdhg_beta.value_or(0.0), gamma = config.pdhg_gamma.value_or(0.0);
  if (!config.pdhg_beta || !config.pdhg_gamma) {
    const double inv = 1.0 / operator_norm(a);
    if (!config.pdhg_beta) beta = inv;
    if (!config.pdhg_gamma) gamma = inv;
  }
  Signal u(z1.begin(), z1.end());
  Signal nu(a.output_dim(), 0.0);
  Trajectory traj;
  traj.push_back(make_iterate(a, d, u, config.xi, projector));
  for (std::size_t t = 0; t < config.iterations; ++t) {
    Signal un = projector(axpy(u, -gamma, a.adjoint(nu)));
    Signal extrap(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) extrap[i] = 2.0 * un[i] - u[i];
    nu = prox_conjugate(axpy(nu, beta, a.apply(extrap)), beta, d);
    u = std::move(un);
    traj.push_back(make_iterate(a, d, u, config.xi, projector));
  }
  return traj;
}

Trajectory linearized_admm(const LinearOperator& a, std::span<const double> d, std::span<const double> z1,
                           const SolverConfig& config, const Projector& projector) {
  validate(config);
  check_problem(a, d, z1);
  double beta = config.ladmm_beta.value_or(0.0), gamma = config.ladmm_gamma.value_or(0.0);
  if (!config.ladmm_beta || !config.ladmm_gamma) {
    const double inv = 1.0 / operator_norm(a);
    // The linearized primal step needs beta ||A||^2 <= 1.
    if (!config.ladmm_beta) beta = inv * inv;
    if (!config.ladmm_gamma) gamma = inv;
  }
  const std::size_t m = a.output_dim();
  Signal u(z1.begin(), z1.end());
  Signal y = a.apply(u);
  Signal nu(m, 0.0);
  Trajectory traj;
  traj.push_back(make_iterate(a, d, u, config.xi, projector));
  for (std::size_t t = 0; t < config.iterations; ++t) {
    Signal au = a.apply(u);
    Signal r(m);
    for (std::size_t i = 0; i < m; ++i) r[i] = nu[i] + au[i] - y[i];
    u = projector(axpy(u, -beta, a.adjoint(r)));
    au = a.apply(u);
    for (std::size_t i = 0; i < m; ++i) r[i] = y[i] + gamma * (nu[i] + au[i] - y[i]);
    y = prox_quadratic(r, gamma, d);
    for (std::size_t i = 0; i < m; ++i) nu[i] += au[i] - y[i];
    traj.push_back(make_iterate(a, d, u, config.xi, projector));
  }
  return traj;
}

double adjoint_test(const LinearOperator& a, Rng& rng, std::size_t probes) {
  if (probes == 0) throw ContractError("adjoint_test: probes must be >= 1");
  double worst = 0.0;
  for (std::size_t p = 0; p < probes; ++p) {
    Signal x(a.input_dim()), y(a.output_dim());
    for (double& v : x) v = rng.normal();
    for (double& v : y) v = rng.normal();
    const Signal ax = a.apply(x);
    const Signal aty = a.adjoint(y);
    const double scale = norm(ax) * norm(y);
    const double gap = std::abs(dot(ax, y) - dot(x, aty));
    worst = std::max(worst, scale > 0.0 ? gap / scale : gap);
  }
  return worst;
}

double power_method_norm(const LinearOperator& a, std::size_t iters, std::uint64_t seed) {
  if (iters == 0) throw ContractError("power_method_norm: iters must be >= 1");
  Rng rng(seed);
  Signal x(a.input_dim());
  for (double& v : x) v = rng.normal();
  double n = norm(x);
  double lambda = 0.0;
  for (std::size_t k = 0; k < iters; ++k) {
    for (double& v : x) v /= n;
    Signal y = a.adjoint(a.apply(x));
    lambda = dot(x, y);
    n = norm(y);
    if (n == 0.0) return 0.0;
    x = std::move(y);
  }
  return lambda;
}

void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path, bool summary) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17);
  const std::size_t dim = traj.empty() ? 0 : traj.front().z.size();
  out << "iteration,objective,residual";
  if (summary) {
    out << ",min,max,mean,std";
  } else {
    for (std::size_t i = 0; i < dim; ++i) out << ",z" << i;
  }
  out << '\n';
  for (std::size_t t = 0; t < traj.size(); ++t) {
    const Iterate& it = traj[t];
    out << t + 1 << ',' << it.objective << ',' << it.residual;
    if (summary) {
      const auto [lo, hi] = std::minmax_element(it.z.begin(), it.z.end());
      double mean = 0.0, var = 0.0;
      for (double v : it.z) mean += v;
      mean /= static_cast<double>(it.z.size());
      for (double v : it.z) var += (v - mean) * (v - mean);
      out << ',' << *lo << ',' << *hi << ',' << mean << ',' << std::sqrt(var / static_cast<double>(it.z.size()));
    } else {
      for (double v : it.z) out << ',' << v;
    }
    out << '\n';
  }
}

}  // namespace wpp::solvers
