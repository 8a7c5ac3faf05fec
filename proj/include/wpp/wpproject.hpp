#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "wpp/schedule.hpp"
#include "wpp/signal.hpp"

namespace wpp {

struct ProjectOptions {
  /// Number of Halpern steps; defaults to the stage count.
  std::optional<std::size_t> num_steps;
  /// Allow num_steps beyond the stage count by reusing the final stage.
  bool repeat_last_stage = false;
};

/// u^1 = u, u^{k+1} = gamma_k u^1 + (1 - gamma_k) g_k(u^k); returns the last iterate.
/// Throws ShapeError on a dimension mismatch and ContractError when num_steps
/// exceeds the stage count without repeat_last_stage.
Signal wp_project(const ProjectorSchedule& schedule, std::span<const double> u, const ProjectOptions& options = {});

/// Every iterate u^1 .. u^{n+1}.
std::vector<Signal> wp_trajectory(const ProjectorSchedule& schedule, std::span<const double> u,
                                  const ProjectOptions& options = {});

/// wp_project applied to every row, sharing one estimator evaluation per stage.
SampleSet wp_project_batch(const ProjectorSchedule& schedule, const SampleSet& batch,
                           const ProjectOptions& options = {});

}  // namespace wpp
