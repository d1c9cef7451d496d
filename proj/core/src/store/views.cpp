#include "rewardevo/store/views.hpp"

namespace rewardevo::store {
namespace {

using nlohmann::json;

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json ref_json(const evo::CandidateRef& ref) {
  return {{"restart", ref.restart}, {"iteration", ref.iteration}, {"sample", ref.sample}};
}

json candidate_json(const evo::Candidate& c) {
  json error = nullptr;
  if (c.error) error = {{"line", c.error->line()}, {"column", c.error->column()}, {"message", c.error->message()}};
  return {{"sample", c.index.sample},
          {"source", c.source},
          {"raw_text", c.raw_text},
          {"program_text", c.program_text},
          {"error", error},
          {"scored", c.scored},
          {"score", opt_json(c.score)},
          {"run_scores", c.run_scores},
          {"training_error", c.training_error},
          {"report", c.report ? evo::to_json(*c.report) : json(nullptr)},
          {"feedback", c.feedback},
          {"failed", c.failed()}};
}

std::optional<int> awaiting_iteration(const evo::RunRecord& record) {
  if (record.status() != evo::RunStatus::paused_for_feedback || record.iterations().empty()) return std::nullopt;
  return record.iterations().back().iteration + 1;
}

}  // namespace

std::vector<std::optional<double>> best_so_far_mean(const evo::RunRecord& record) {
  const int n = record.config().iterations;
  std::vector<double> sum(static_cast<std::size_t>(std::max(n, 0)), 0.0);
  std::vector<int> count(sum.size(), 0);
  for (const auto& it : record.iterations()) {
    if (!it.closed || !it.restart_best_score || it.iteration >= n) continue;
    sum[static_cast<std::size_t>(it.iteration)] += *it.restart_best_score;
    ++count[static_cast<std::size_t>(it.iteration)];
  }
  std::vector<std::optional<double>> out(sum.size());
  for (std::size_t i = 0; i < sum.size(); ++i) {
    if (count[i] > 0) out[i] = sum[i] / count[i];
  }
  return out;
}

json run_list_entry(const evo::RunRecord& record) {
  const auto& best = record.overall_best();
  return {{"run_id", record.run_id()},
          {"env", record.env_id()},
          {"status", evo::to_string(record.status())},
          {"mode", evo::to_string(record.config().mode)},
          {"last_seq", record.last_seq()},
          {"iterations", record.iterations().size()},
          {"best_score", best ? json(best->score) : json(nullptr)}};
}

json run_summary(const evo::RunRecord& record) {
  json per_iteration = json::array();
  std::size_t index = 0;
  for (const auto& it : record.iterations()) {
    per_iteration.push_back({{"index", index++},
                             {"restart", it.restart},
                             {"iteration", it.iteration},
                             {"closed", it.closed},
                             {"candidates", it.candidates.size()},
                             {"best_sample", it.best_sample ? json(*it.best_sample) : json(nullptr)},
                             {"best_score", opt_json(it.best_score)},
                             {"restart_best_score", opt_json(it.restart_best_score)},
                             {"human_feedback", it.human_feedback ? json(*it.human_feedback) : json(nullptr)}});
  }
  json best_so_far = json::array();
  for (const auto& v : best_so_far_mean(record)) best_so_far.push_back(opt_json(v));

  json summary = run_list_entry(record);
  summary["config"] = evo::to_json(record.config());
  summary["failure"] = record.failure();
  summary["samples_consumed"] = record.samples_consumed();
  summary["iteration_list"] = per_iteration;
  summary["best_so_far_mean"] = best_so_far;
  summary["overall_best"] = nullptr;
  if (const auto& best = record.overall_best()) {
    summary["overall_best"] = {{"ref", ref_json(best->ref)}, {"program_text", best->program_text}, {"score", best->score}};
  }
  summary["final"] = nullptr;
  if (const auto& fin = record.final_score()) {
    summary["final"] = {{"ref", ref_json(fin->ref)}, {"score", fin->score}, {"run_scores", fin->run_scores}};
  }
  const auto awaiting = awaiting_iteration(record);
  summary["awaiting_feedback_for"] = awaiting ? json(*awaiting) : json(nullptr);
  return summary;
}

std::optional<json> iteration_view(const evo::RunRecord& record, std::size_t n) {
  if (n >= record.iterations().size()) return std::nullopt;
  const auto& it = record.iterations()[n];
  json prompt = nullptr;
  if (it.prompt) {
    prompt = {{"k", it.prompt->k},
              {"sample_seed", it.prompt->sample_seed},
              {"samples_consumed", it.prompt->samples_consumed},
              {"system", it.prompt->system},
              {"user", it.prompt->user}};
  }
  json candidates = json::array();
  for (const auto& c : it.candidates) candidates.push_back(candidate_json(c));
  return json{{"index", n},
              {"restart", it.restart},
              {"iteration", it.iteration},
              {"prompt", prompt},
              {"candidates", candidates},
              {"closed", it.closed},
              {"best_sample", it.best_sample ? json(*it.best_sample) : json(nullptr)},
              {"best_score", opt_json(it.best_score)},
              {"restart_best_score", opt_json(it.restart_best_score)},
              {"feedback", it.feedback},
              {"human_feedback", it.human_feedback ? json(*it.human_feedback) : json(nullptr)}};
}

}  // namespace rewardevo::store
