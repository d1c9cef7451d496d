#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rewardevo/store/run_store.hpp"

namespace rewardevo::store {

struct ReportOptions {
  bool baselines = true;    // train the Human and Sparse fixtures for normalization
  bool correlation = true;  // retrain the best program to correlate it with the Human reward
};

// Metrics document for one run. Baselines use the run's trainer, final seed
// and final_runs, so they are comparable with the final score. Final scores
// are aggregated two ways: mean over runs of each run's best checkpoint
// ("per_run_max", the recorded score) and best checkpoint of the run-mean
// curve ("pooled").
nlohmann::json build_report(const LoadedRun& run, const ReportOptions& options = {});

// Pairwise comparison of final run scores: probability of improvement of
// each run over every other, with IQM and bootstrap intervals per run.
nlohmann::json compare_reports(const std::vector<nlohmann::json>& reports);

// Plain-text table for the CLI.
std::string render_report(const nlohmann::json& report);
std::string render_comparison(const nlohmann::json& comparison);

}  // namespace rewardevo::store
