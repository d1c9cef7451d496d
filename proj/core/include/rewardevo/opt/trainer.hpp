#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rewardevo/dsl/program.hpp"
#include "rewardevo/env/environment.hpp"

namespace rewardevo::opt {

// actions = tanh(W x + b), W stored row-major (action_dim x observation_dim).
struct Policy {
  int observation_dim = 0;
  int action_dim = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  static Policy zeros(int observation_dim, int action_dim);
  static Policy from_parameters(int observation_dim, int action_dim, std::span<const double> params);
  std::vector<double> parameters() const;
  void act(std::span<const double> observation, std::span<double> action) const;

  friend bool operator==(const Policy&, const Policy&) = default;
};

struct TrainerConfig {
  int population = 64;
  double elite_fraction = 0.125;
  int generations = 40;
  int rollouts_per_candidate = 2;
  int checkpoints = 10;
  double noise_floor = 0.01;
  std::uint64_t seed = 0;
  double initial_std = 0.5;
  int eval_episodes = 10;          // fixed episodes per checkpoint evaluation
  double time_budget_s = 30.0;     // <= 0 disables the budget
  int transition_sample_cap = 5000;
  int workers = 1;                 // threads for population rollouts

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
  friend bool operator==(const TrainerConfig&, const TrainerConfig&) = default;
};

struct Snapshot {
  int generation = 0;
  double fitness = 0.0;
  std::vector<std::pair<std::string, double>> component_means;  // declaration order
  double episode_length_mean = 0.0;

  friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

struct TrainingReport {
  std::vector<Snapshot> checkpoint_snapshots;
  double final_fitness = 0.0;    // best checkpoint fitness
  double initial_fitness = 0.0;  // fitness of the untrained initial mean
  std::vector<env::Transition> transitions_sample;
  bool aborted = false;  // time budget exhausted; remaining snapshots reuse the current mean
  std::string note;
  std::chrono::duration<double> wall_time{0};

  // wall_time is excluded.
  friend bool operator==(const TrainingReport& a, const TrainingReport& b) {
    return a.checkpoint_snapshots == b.checkpoint_snapshots && a.final_fitness == b.final_fitness &&
           a.initial_fitness == b.initial_fitness && a.transitions_sample == b.transitions_sample &&
           a.aborted == b.aborted && a.note == b.note;
  }
};

class TrainingFailure : public std::runtime_error {
 public:
  TrainingFailure(int step, const std::string& message)
      : std::runtime_error("training failed at step " + std::to_string(step) + ": " + message), step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

// Generation indices at which snapshots are taken: evenly spaced, ending at
// cfg.generations.
std::vector<int> checkpoint_generations(const TrainerConfig& cfg);

std::pair<Policy, TrainingReport> train_policy(const env::Environment& environment,
                                               const dsl::RewardProgram& reward, const TrainerConfig& cfg,
                                               const Policy* warm_start = nullptr);
std::pair<Policy, TrainingReport> train_policy(const env::EnvironmentSpec& spec, const dsl::RewardProgram& reward,
                                               const TrainerConfig& cfg, const Policy* warm_start = nullptr);

// Mean final_fitness over train_policy runs with seeds cfg.seed .. cfg.seed + runs - 1.
double evaluate_policy_final(const env::EnvironmentSpec& spec, const dsl::RewardProgram& reward,
                             const TrainerConfig& cfg, int runs);

struct PolicyEvaluation {
  double fitness = 0.0;
  double episode_length_mean = 0.0;
  std::vector<double> component_means;
};

// Task fitness of a fixed policy over `episodes` episodes with seeds derived
// from `seed`.
PolicyEvaluation evaluate_policy(const env::Environment& environment, const dsl::RewardProgram& reward,
                                 const Policy& policy, std::uint64_t seed, int episodes);

}  // namespace rewardevo::opt
