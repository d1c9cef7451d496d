#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rewardevo/dsl/program.hpp"

namespace rewardevo::env {

enum class FitnessKind { duration, neg_distance, indicator, consecutive_successes };

std::string_view to_string(FitnessKind kind) noexcept;

struct EnvironmentSpec {
  std::string id;
  std::string task_description;
  dsl::VarRegistry registry;
  int observation_dim = 0;
  int action_dim = 1;
  int episode_length = 1;
  FitnessKind fitness_kind = FitnessKind::duration;
  double success_threshold = 0.0;  // indicator and consecutive_successes
  // Bundled reward fixtures in the DSL: a hand-shaped reward and the fitness
  // form itself.
  std::string human_reward;
  std::string sparse_reward;
};

inline constexpr std::size_t kMaxStateValues = 8;
inline constexpr std::size_t kMaxActionDim = 4;

// Owned, copyable episode state. The meaning of `values` is environment
// specific (see each environment's documentation).
struct EnvState {
  std::array<double, kMaxStateValues> values{};
  std::array<double, kMaxActionDim> last_action{};
  double prev_dist = 0.0;
  int step_index = 0;
  int waypoint_index = 0;
  int steps_on_waypoint = 0;
  std::uint32_t target_draws = 0;
  bool switch_pending = false;
  bool terminated = false;
  std::uint64_t rng_seed = 0;

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct StepEvent {
  bool terminated = false;
  bool success = false;  // success condition met after this step
  bool miss = false;     // current goal abandoned after this step
  double fitness_increment = 0.0;
};

// One environment step. Bindings are flat arrays in the registry's layout.
struct Transition {
  std::vector<double> binding_before;
  std::vector<double> action;
  std::vector<double> binding_after;
  bool terminated = false;
  double fitness_increment = 0.0;
  bool success = false;
  bool miss = false;

  dsl::Binding before(const dsl::VarRegistry& registry) const {
    return dsl::unflatten_binding(registry, binding_before);
  }
  dsl::Binding after(const dsl::VarRegistry& registry) const {
    return dsl::unflatten_binding(registry, binding_after);
  }

  friend bool operator==(const Transition&, const Transition&) = default;
};

class EnvironmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Environment {
 public:
  explicit Environment(EnvironmentSpec spec) : spec_(std::move(spec)) {}
  virtual ~Environment() = default;
  Environment(const Environment&) = delete;
  Environment& operator=(const Environment&) = delete;

  const EnvironmentSpec& spec() const noexcept { return spec_; }

  virtual EnvState reset(std::uint64_t seed) const = 0;
  // Policy input, spec().observation_dim values.
  virtual void observe(const EnvState& state, std::span<double> observation) const = 0;
  // Registry variables, spec().registry.flat_size() values.
  virtual void bind(const EnvState& state, std::span<double> flat) const = 0;

  // Advances `state` in place. Action components are clamped to [-1, 1].
  // Throws EnvironmentError on a terminated state or a wrong action size.
  StepEvent advance(EnvState& state, std::span<const double> action) const;

  std::pair<EnvState, Transition> step(const EnvState& state, std::span<const double> action) const;

 protected:
  virtual StepEvent simulate(EnvState& state, std::span<const double> action) const = 0;

 private:
  EnvironmentSpec spec_;
};

// Shared immutable instances; throws EnvironmentError for unknown ids.
const Environment& get_environment(std::string_view id);
std::vector<std::string> environment_ids();

EnvState create_environment(std::string_view id, std::uint64_t seed);

// Incremental form of compute_fitness used by the trainer.
class FitnessAccumulator {
 public:
  explicit FitnessAccumulator(FitnessKind kind) : kind_(kind) {}
  void add(const StepEvent& event);
  double value() const;
  int steps() const noexcept { return steps_; }

 private:
  FitnessKind kind_;
  int steps_ = 0;
  double sum_ = 0.0;
  bool any_success_ = false;
  int run_ = 0;
  int best_run_ = 0;
};

// Task score of one episode. Throws EnvironmentError on an empty episode.
double compute_fitness(std::span<const Transition> transitions, const EnvironmentSpec& spec);

// Environment-as-context document: task description and one line per
// registry variable. Contains no dynamics or scoring details.
std::string render_context(const EnvironmentSpec& spec);

}  // namespace rewardevo::env
