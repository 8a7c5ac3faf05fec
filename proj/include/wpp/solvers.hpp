#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "wpp/rng.hpp"
#include "wpp/signal.hpp"
#include "wpp/tensor.hpp"

namespace wpp::solvers {

/// Forward map A : R^n -> R^m with its adjoint.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t output_dim() const = 0;
  virtual Signal apply(std::span<const double> x) const = 0;
  virtual Signal adjoint(std::span<const double> y) const = 0;
};

class DenseOperator final : public LinearOperator {
 public:
  /// Throws ShapeError unless `a` is rank 2.
  explicit DenseOperator(Tensor a);
  const Tensor& matrix() const noexcept { return a_; }
  std::size_t input_dim() const override { return a_.dim(1); }
  std::size_t output_dim() const override { return a_.dim(0); }
  Signal apply(std::span<const double> x) const override;
  Signal adjoint(std::span<const double> y) const override;

 private:
  Tensor a_;
};

struct Triplet {
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;
};

/// Compressed sparse row matrix; the adjoint is the explicit transpose.
class SparseOperator final : public LinearOperator {
 public:
  SparseOperator(std::size_t rows, std::size_t cols, std::vector<Triplet> entries);
  std::size_t input_dim() const override { return cols_; }
  std::size_t output_dim() const override { return rows_; }
  Signal apply(std::span<const double> x) const override;
  Signal adjoint(std::span<const double> y) const override;

  std::size_t nonzeros() const noexcept { return values_.size(); }
  /// Entries of one row as (column, value) pairs.
  std::vector<std::pair<std::size_t, double>> row_entries(std::size_t r) const;

 private:
  std::size_t rows_, cols_;
  std::vector<std::size_t> row_ptr_, col_idx_;
  std::vector<double> values_;
};

/// Wraps a pair of callables, for tests and fault injection.
class FunctionOperator final : public LinearOperator {
 public:
  using Map = std::function<Signal(std::span<const double>)>;
  FunctionOperator(std::size_t in, std::size_t out, Map apply, Map adjoint)
      : in_(in), out_(out), apply_(std::move(apply)), adjoint_(std::move(adjoint)) {}
  std::size_t input_dim() const override { return in_; }
  std::size_t output_dim() const override { return out_; }
  Signal apply(std::span<const double> x) const override { return apply_(x); }
  Signal adjoint(std::span<const double> y) const override { return adjoint_(y); }

 private:
  std::size_t in_, out_;
  Map apply_, adjoint_;
};

using Projector = std::function<Signal(std::span<const double>)>;

struct SolverConfig {
  double kappa = 0.1;
  double xi = 0.08;
  std::size_t iterations = 10;
  /// PDHG dual and primal steps; unset means 1 / ||A||.
  std::optional<double> pdhg_beta, pdhg_gamma;
  /// Linearized ADMM steps; unset means beta = 1 / ||A||^2, gamma = 1 / ||A||.
  std::optional<double> ladmm_beta, ladmm_gamma;
};

/// Throws ConfigError for kappa outside (0, 1], xi <= 0, or explicit steps <= 0.
void validate(const SolverConfig& config);

struct Iterate {
  Signal z;
  double objective = 0.0;
  /// ||z - P(z - xi A^T (A z - d))||.
  double residual = 0.0;
};

using Trajectory = std::vector<Iterate>;

/// 0.5 ||A z - d||^2
double objective(const LinearOperator& a, std::span<const double> d, std::span<const double> z);
double fixed_point_residual(const LinearOperator& a, std::span<const double> d, std::span<const double> z,
                            double xi, const Projector& projector);

/// (y + gamma d) / (1 + gamma): prox of gamma * 0.5 ||. - d||^2. Throws ContractError for gamma <= 0.
Signal prox_quadratic(std::span<const double> y, double gamma, std::span<const double> d);
/// prox of beta f* for f = 0.5 ||. - d||^2, in closed form.
Signal prox_conjugate(std::span<const double> v, double beta, std::span<const double> d);
/// The same prox through the Moreau identity v - beta prox_{f/beta}(v / beta).
Signal prox_conjugate_moreau(std::span<const double> v, double beta, std::span<const double> d);

/// z <- (1 - kappa) z + kappa P(z - xi A^T (A z - d)). Trajectories start with z^1.
Trajectory relaxed_projected_gradient(const LinearOperator& a, std::span<const double> d,
                                      std::span<const double> z1, const SolverConfig& config,
                                      const Projector& projector);

/// u <- P(u - gamma A^T nu); nu <- prox_{beta f*}(nu + beta A (2 u_new - u)).
Trajectory pdhg(const LinearOperator& a, std::span<const double> d, std::span<const double> z1,
                const SolverConfig& config, const Projector& projector);

/// u <- P(u - beta A^T (nu + A u - y)); y <- prox_{gamma f}(y + gamma (nu + A u_new - y));
/// nu <- nu + A u_new - y_new.
Trajectory linearized_admm(const LinearOperator& a, std::span<const double> d, std::span<const double> z1,
                           const SolverConfig& config, const Projector& projector);

/// max over probes of |<Ax, y> - <x, A^T y>| / (||Ax|| ||y||).
double adjoint_test(const LinearOperator& a, Rng& rng, std::size_t probes);

/// Dominant eigenvalue of A^T A by power iteration. Throws ContractError for iters = 0.
double power_method_norm(const LinearOperator& a, std::size_t iters, std::uint64_t seed = 0);

/// CSV with iteration, objective, residual, then coordinates (or min/max/mean/std when
/// `summary` is set).
void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path, bool summary);

}  // namespace wpp::solvers
