#include "rewardevo/reflect/reflection.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace rewardevo::reflect {
namespace {

constexpr std::string_view kHeader =
    "We trained a policy with your reward program and recorded the following values at evenly "
    "spaced checkpoints during training. Each line lists one series, followed by its max, mean and min.\n";
constexpr std::string_view kClosing =
    "Use these statistics to judge which parts of the reward help the task. Then write an improved "
    "reward program. You may rescale, rewrite or drop components, or add new ones.\n";

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%#.4g", v);
  std::string s(buf);
  if (s.back() == '.') s.pop_back();
  return s;
}

std::string header_with_count(std::size_t count) {
  return fmt::format("{}Checkpoints: {}.\n", kHeader, count);
}

std::string abort_line(const opt::TrainingReport& report) {
  if (!report.aborted) return {};
  return fmt::format("Note: training was stopped early and these statistics come from a slow or degenerate run. {}\n",
                     report.note);
}

}  // namespace

std::string format_series(std::string_view name, std::span<const double> values) {
  std::vector<std::string> rendered;
  rendered.reserve(values.size());
  for (double v : values) rendered.push_back(number(v));

  std::string list;
  const bool constant = rendered.size() > 1 &&
                        std::all_of(rendered.begin(), rendered.end(), [&](const auto& s) { return s == rendered[0]; });
  if (constant) {
    list = fmt::format("[{}, ×{}]", rendered[0], rendered.size());
  } else {
    list = fmt::format("[{}]", fmt::join(rendered, ", "));
  }
  if (values.empty()) return fmt::format("{}: {}\n", name, list);

  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  return fmt::format("{}: {}; max {}, mean {}, min {}\n", name, list, number(*hi), number(mean), number(*lo));
}

RewardReflection build_reflection(const opt::TrainingReport& report, const dsl::RewardProgram& program) {
  const auto names = program.component_names();
  RewardReflection out;
  out.per_component_series.reserve(names.size());
  for (const auto& name : names) out.per_component_series.emplace_back(name, std::vector<double>{});

  for (const auto& snap : report.checkpoint_snapshots) {
    if (snap.component_means.size() != names.size()) {
      throw std::invalid_argument("report components do not match the program");
    }
    for (std::size_t c = 0; c < names.size(); ++c) {
      if (snap.component_means[c].first != names[c]) {
        throw std::invalid_argument("report component " + snap.component_means[c].first +
                                    " does not match program component " + names[c]);
      }
      out.per_component_series[c].second.push_back(snap.component_means[c].second);
    }
    out.fitness_series.push_back(snap.fitness);
    out.episode_length_series.push_back(snap.episode_length_mean);
  }
  out.verdict_note = report.aborted ? report.note : std::string{};

  out.text = header_with_count(report.checkpoint_snapshots.size());
  for (const auto& [name, series] : out.per_component_series) out.text += format_series(name, series);
  out.text += format_series(kTaskScoreLabel, out.fitness_series);
  out.text += format_series("episode_length", out.episode_length_series);
  out.text += abort_line(report);
  out.text += kClosing;
  return out;
}

std::string build_fitness_only_feedback(const opt::TrainingReport& report) {
  std::vector<double> fitness;
  for (const auto& snap : report.checkpoint_snapshots) fitness.push_back(snap.fitness);
  std::string text = header_with_count(fitness.size());
  text += format_series(kTaskScoreLabel, fitness);
  text += abort_line(report);
  text += kClosing;
  return text;
}

std::string build_failure_feedback(const dsl::ParseError& error) {
  return fmt::format(
      "Your reward program could not be compiled. Error at line {}, column {}: {}\n"
      "Please fix this error and write the complete corrected reward program.\n",
      error.line(), error.column(), error.message());
}

std::string build_failure_feedback(const opt::TrainingFailure& error) {
  return fmt::format(
      "Training with your reward program failed: {}\n"
      "Please fix this error and write the complete corrected reward program.\n",
      error.what());
}

std::string build_failure_feedback(const TimeoutAbort& abort) {
  return fmt::format(
      "Training with your reward program was slow or degenerate and was stopped early. {}\n"
      "The candidate keeps its measured task_score of {}. Please write a simpler reward program.\n",
      abort.note, number(abort.score));
}

}  // namespace rewardevo::reflect
