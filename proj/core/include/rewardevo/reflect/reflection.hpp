#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rewardevo/dsl/program.hpp"
#include "rewardevo/opt/trainer.hpp"

namespace rewardevo::reflect {

struct RewardReflection {
  std::string text;
  std::vector<std::pair<std::string, std::vector<double>>> per_component_series;
  std::vector<double> fitness_series;
  std::vector<double> episode_length_series;
  std::string verdict_note;
};

// Label of the fitness series in every feedback text.
inline constexpr std::string_view kTaskScoreLabel = "task_score";

// "name: [v1, v2, ...]; max M, mean A, min m" with 4 significant digits. A
// series whose values all render identically is written "[v, ×n]".
std::string format_series(std::string_view name, std::span<const double> values);

// Throws std::invalid_argument when snapshot keys differ from the program's
// component names.
RewardReflection build_reflection(const opt::TrainingReport& report, const dsl::RewardProgram& program);

// The reflection with every component and episode-length line removed.
std::string build_fitness_only_feedback(const opt::TrainingReport& report);

std::string build_failure_feedback(const dsl::ParseError& error);
std::string build_failure_feedback(const opt::TrainingFailure& error);

struct TimeoutAbort {
  std::string note;
  double score = 0.0;
};
std::string build_failure_feedback(const TimeoutAbort& abort);

}  // namespace rewardevo::reflect
