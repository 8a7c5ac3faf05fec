#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wpp/experiment.hpp"
#include "wpp/solvers.hpp"

namespace wpp::checks {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// d_M minimizes the dual loss among nonnegative 1-Lipschitz candidates when the true
/// samples are the projections of the fake samples (ball, half-space, segment).
CheckResult check_minimality(std::uint64_t seed = 11, std::size_t candidates = 200);

/// Exact-distance schedules with gamma_k = 1/k and mu = (0.5, 0.5) drive 500 random
/// starts to their projections: mean squared error < 1e-4 within 500 steps.
CheckResult check_halpern_convergence(std::uint64_t seed = 12, std::size_t starts = 500, std::size_t steps = 500);

/// mean_distance_gap of the exact distance equals the empirical mean distance gap.
CheckResult check_mean_distance(std::uint64_t seed = 13, std::size_t sets = 100);

/// Orthonormal toy nets stay 1-Lipschitz during training; the gradient-norm monitor of
/// exact distances is 1 off the manifold.
CheckResult check_lipschitz(std::uint64_t seed = 14);

/// Input and parameter gradients against central finite differences.
CheckResult check_gradients(std::uint64_t seed = 15, std::size_t configurations = 100);

/// Mean-only step sizes move every point equally; pointwise terms move far points farther.
CheckResult check_straggler();

/// Relaxed projected gradient, PDHG and linearized ADMM agree on the toy instance.
CheckResult check_solver_agreement();

/// Dot-product adjoint test at 1e-8 for `a` (the desk Radon operator by default).
CheckResult check_adjoint(const solvers::LinearOperator& a, const std::string& label, std::uint64_t seed = 16);
CheckResult check_radon_adjoint();

/// The desk Radon operator with a perturbed adjoint, for negative controls.
solvers::FunctionOperator wrong_adjoint_radon();

/// Trains the toy preset and compares both solver endpoints with the arc minimizer.
CheckResult check_toy_convergence(const experiment::ExperimentConfig& config);

/// End-to-end CT study: WP mean PSNR at least 1 dB above TV and a higher mean SSIM.
CheckResult check_ct_study(const experiment::ExperimentConfig& config);

/// The checks needing no training: minimality, Halpern, mean distance, Lipschitz,
/// gradients, straggler, solver agreement, Radon adjoint.
std::vector<CheckResult> invariant_suite(bool inject_wrong_adjoint = false);

}  // namespace wpp::checks
