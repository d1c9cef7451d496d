#include "rewardevo/env/environment.hpp"

#include <algorithm>

namespace rewardevo::env {

std::string_view to_string(FitnessKind kind) noexcept {
  switch (kind) {
    case FitnessKind::duration: return "duration";
    case FitnessKind::neg_distance: return "neg_distance";
    case FitnessKind::indicator: return "indicator";
    case FitnessKind::consecutive_successes: return "consecutive_successes";
  }
  return "unknown";
}

StepEvent Environment::advance(EnvState& state, std::span<const double> action) const {
  if (state.terminated) throw EnvironmentError("cannot step a terminated episode");
  if (static_cast<int>(action.size()) != spec_.action_dim) {
    throw EnvironmentError("action has " + std::to_string(action.size()) + " values, expected " +
                           std::to_string(spec_.action_dim));
  }
  std::array<double, kMaxActionDim> clamped{};
  for (std::size_t i = 0; i < action.size(); ++i) clamped[i] = std::clamp(action[i], -1.0, 1.0);
  const std::span<const double> a(clamped.data(), action.size());

  StepEvent event = simulate(state, a);
  std::copy(a.begin(), a.end(), state.last_action.begin());
  ++state.step_index;
  if (state.step_index >= spec_.episode_length) event.terminated = true;
  state.terminated = event.terminated;
  return event;
}

std::pair<EnvState, Transition> Environment::step(const EnvState& state,
                                                  std::span<const double> action) const {
  Transition t;
  const auto flat = static_cast<std::size_t>(spec_.registry.flat_size());
  t.binding_before.resize(flat);
  t.binding_after.resize(flat);
  bind(state, t.binding_before);

  EnvState next = state;
  StepEvent event = advance(next, action);
  bind(next, t.binding_after);
  t.action.assign(next.last_action.begin(), next.last_action.begin() + spec_.action_dim);
  t.terminated = event.terminated;
  t.fitness_increment = event.fitness_increment;
  t.success = event.success;
  t.miss = event.miss;
  return {next, std::move(t)};
}

EnvState create_environment(std::string_view id, std::uint64_t seed) {
  return get_environment(id).reset(seed);
}

void FitnessAccumulator::add(const StepEvent& event) {
  ++steps_;
  sum_ += event.fitness_increment;
  if (event.success) {
    any_success_ = true;
    best_run_ = std::max(best_run_, ++run_);
  } else if (event.miss) {
    run_ = 0;
  }
}

double FitnessAccumulator::value() const {
  switch (kind_) {
    case FitnessKind::duration: return static_cast<double>(steps_);
    case FitnessKind::neg_distance: return steps_ > 0 ? sum_ / steps_ : 0.0;
    case FitnessKind::indicator: return any_success_ ? 1.0 : 0.0;
    case FitnessKind::consecutive_successes: return static_cast<double>(best_run_);
  }
  return 0.0;
}

double compute_fitness(std::span<const Transition> transitions, const EnvironmentSpec& spec) {
  if (transitions.empty()) throw EnvironmentError("cannot score an empty episode");
  FitnessAccumulator acc(spec.fitness_kind);
  for (const auto& t : transitions) {
    acc.add(StepEvent{t.terminated, t.success, t.miss, t.fitness_increment});
  }
  return acc.value();
}

std::string render_context(const EnvironmentSpec& spec) {
  std::string out;
  out += "Environment: " + spec.id + "\n";
  out += "Task: " + spec.task_description + "\n";
  out += "Action: " + std::to_string(spec.action_dim) +
         " value(s) in [-1, 1], applied once per step and exposed as `action`.\n";
  out += "Variables available to reward programs (evaluated after each step):\n";
  for (const auto& var : spec.registry.entries()) {
    out += "- " + var.name + ": ";
    out += var.kind == dsl::VarKind::scalar ? std::string("scalar")
                                            : "vector(" + std::to_string(var.dimension) + ")";
    out += var.units.empty() ? std::string(", unitless") : ", units " + var.units;
    out += ". " + var.description + "\n";
  }
  return out;
}

}  // namespace rewardevo::env
