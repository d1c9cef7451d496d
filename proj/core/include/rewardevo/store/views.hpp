#pragma once

#include <cstddef>
#include <optional>

#include <nlohmann/json.hpp>

#include "rewardevo/evo/record.hpp"

namespace rewardevo::store {

// JSON documents served by the HTTP API and printed by the CLI.

// {run_id, env, status, mode, last_seq, iterations, best_score}
nlohmann::json run_list_entry(const evo::RunRecord& record);

// Everything except candidate details: config, status, failure, per-iteration
// bests, best-so-far series, overall best, final score, and the iteration
// awaiting feedback when paused.
nlohmann::json run_summary(const evo::RunRecord& record);

// Iteration at flat index `n` in record order with its prompt, candidates,
// scores, reports and feedback texts. Absent when out of range.
std::optional<nlohmann::json> iteration_view(const evo::RunRecord& record, std::size_t n);

// Mean over restarts of the best score seen up to each iteration; restarts
// whose best is still undefined are skipped.
std::vector<std::optional<double>> best_so_far_mean(const evo::RunRecord& record);

}  // namespace rewardevo::store
