#include "wpp/wpproject.hpp"

#include <string>

#include "wpp/errors.hpp"

namespace wpp {
namespace {

std::size_t resolve_steps(const ProjectorSchedule& s, const ProjectOptions& o) {
  const std::size_t n = o.num_steps.value_or(s.stages.size());
  if (n > s.stages.size() && !(o.repeat_last_stage && !s.stages.empty())) {
    throw ContractError("wp_project: " + std::to_string(n) + " steps requested but the schedule has " +
                        std::to_string(s.stages.size()) + " stages");
  }
  return n;
}

const Stage& stage_at(const ProjectorSchedule& s, std::size_t k) {
  return s.stages[k < s.stages.size() ? k : s.stages.size() - 1];
}

void check_dim(const ProjectorSchedule& s, std::size_t dim) {
  if (dim != s.input_dim) {
    throw ShapeError("wp_project: schedule expects dimension " + std::to_string(s.input_dim) + ", got " +
                     std::to_string(dim));
  }
}

void anchor(std::vector<double>& v, const std::vector<double>& u1, double gamma) {
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = gamma * u1[i] + (1.0 - gamma) * v[i];
}

}  // namespace

std::vector<Signal> wp_trajectory(const ProjectorSchedule& schedule, std::span<const double> u,
                                  const ProjectOptions& options) {
  check_dim(schedule, u.size());
  const std::size_t n = resolve_steps(schedule, options);
  const Signal u1(u.begin(), u.end());
  std::vector<Signal> traj{u1};
  traj.reserve(n + 1);
  for (std::size_t k = 0; k < n; ++k) {
    const Stage& st = stage_at(schedule, k);
    Signal next = g_step(traj.back(), *st.estimator, st.beta, schedule.mu);
    anchor(next, u1, st.gamma);
    traj.push_back(std::move(next));
  }
  return traj;
}

Signal wp_project(const ProjectorSchedule& schedule, std::span<const double> u, const ProjectOptions& options) {
  return wp_trajectory(schedule, u, options).back();
}

SampleSet wp_project_batch(const ProjectorSchedule& schedule, const SampleSet& batch, const ProjectOptions& options) {
  if (batch.empty()) return batch;
  check_dim(schedule, batch.dim());
  const std::size_t n = resolve_steps(schedule, options);
  SampleSet current = batch;
  for (std::size_t k = 0; k < n; ++k) {
    const Stage& st = stage_at(schedule, k);
    current = g_step(current, *st.estimator, st.beta, schedule.mu);
    anchor(current.data(), batch.data(), st.gamma);
  }
  return current;
}

}  // namespace wpp
