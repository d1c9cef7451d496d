#include "rewardevo/store/report.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "rewardevo/env/environment.hpp"
#include "rewardevo/metrics/metrics.hpp"
#include "rewardevo/store/views.hpp"

namespace rewardevo::store {
namespace {

using nlohmann::json;

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

struct Baseline {
  double score = 0.0;
  std::vector<double> run_scores;
};

Baseline train_baseline(const env::EnvironmentSpec& spec, const std::string& source, const evo::EvolutionConfig& cfg) {
  const auto program = dsl::parse_program(source, spec.registry);
  Baseline b;
  for (int i = 0; i < cfg.final_runs; ++i) {
    opt::TrainerConfig t = cfg.trainer;
    t.seed = evo::final_seed(cfg) + static_cast<std::uint64_t>(i);
    b.run_scores.push_back(opt::train_policy(spec, program, t).second.final_fitness);
  }
  b.score = metrics::mean(b.run_scores);
  return b;
}

json stats_json(const std::vector<double>& scores, std::uint64_t seed) {
  json out = {{"mean", metrics::mean(scores)}, {"iqm", nullptr}, {"ci95", nullptr}};
  if (scores.size() >= 4) out["iqm"] = metrics::iqm(scores);
  if (scores.size() >= 2) {
    const auto ci = metrics::bootstrap_ci(scores, metrics::mean, 0.95, 2000, seed);
    out["ci95"] = {ci.lo, ci.hi};
  }
  return out;
}

std::optional<double> pooled_max(const std::vector<std::vector<double>>& per_run) {
  if (per_run.empty() || per_run.front().empty()) return std::nullopt;
  const std::size_t checkpoints = per_run.front().size();
  std::optional<double> best;
  for (std::size_t c = 0; c < checkpoints; ++c) {
    double sum = 0.0;
    for (const auto& run : per_run) {
      if (run.size() != checkpoints) return std::nullopt;
      sum += run[c];
    }
    const double m = sum / static_cast<double>(per_run.size());
    if (!best || m > *best) best = m;
  }
  return best;
}

std::string fmt_opt(const json& v) { return v.is_number() ? fmt::format("{:.4g}", v.get<double>()) : "-"; }

}  // namespace

json build_report(const LoadedRun& run, const ReportOptions& options) {
  const auto& record = run.record;
  const auto& cfg = record.config();
  const auto& spec = env::get_environment(record.env_id()).spec();

  json best_per_iteration = json::array();
  for (const auto& v : record.best_per_iteration()) best_per_iteration.push_back(opt_json(v));
  json best_so_far = json::array();
  for (const auto& v : best_so_far_mean(record)) best_so_far.push_back(opt_json(v));

  json report = {{"run_id", record.run_id()},
                 {"env", record.env_id()},
                 {"status", evo::to_string(record.status())},
                 {"mode", evo::to_string(cfg.mode)},
                 {"ablation", evo::to_string(cfg.ablation)},
                 {"generator", cfg.generator_kind},
                 {"best_per_iteration", best_per_iteration},
                 {"best_so_far_mean", best_so_far},
                 {"overall_best", nullptr},
                 {"final", nullptr},
                 {"baselines", nullptr},
                 {"normalized", nullptr},
                 {"correlation_with_human", nullptr},
                 {"notes", json::array()}};
  if (const auto& best = record.overall_best()) {
    report["overall_best"] = {{"program_text", best->program_text},
                              {"score", best->score},
                              {"ref", {best->ref.restart, best->ref.iteration, best->ref.sample}}};
  }
  const auto& fin = record.final_score();
  if (fin) {
    report["final"] = {{"per_run_max", fin->score},
                       {"pooled", opt_json(pooled_max(fin->run_checkpoint_fitness))},
                       {"run_scores", fin->run_scores},
                       {"stats", stats_json(fin->run_scores, cfg.seed)}};
  } else {
    report["notes"].push_back("run has no final score yet");
  }

  if (options.baselines) {
    const auto human = train_baseline(spec, spec.human_reward, cfg);
    const auto sparse = train_baseline(spec, spec.sparse_reward, cfg);
    report["baselines"] = {{"human", {{"score", human.score}, {"run_scores", human.run_scores}}},
                           {"sparse", {{"score", sparse.score}, {"run_scores", sparse.run_scores}}}};
    if (fin) {
      report["prob_improvement"] = {{"over_human", metrics::prob_improvement(fin->run_scores, human.run_scores)},
                                    {"over_sparse", metrics::prob_improvement(fin->run_scores, sparse.run_scores)}};
      try {
        const double raw = metrics::human_normalized_score({fin->score, sparse.score, human.score});
        report["normalized"] = {{"raw", raw}, {"clipped", metrics::clip_for_aggregate(raw)}};
      } catch (const metrics::MetricError& e) {
        report["notes"].push_back(std::string("normalized score undefined: ") + e.what());
      }
    }
  }

  if (options.correlation && record.overall_best()) {
    const auto program = dsl::parse_program(record.overall_best()->program_text, spec.registry);
    const auto human = dsl::parse_program(spec.human_reward, spec.registry);
    opt::TrainerConfig t = cfg.trainer;
    t.seed = evo::final_seed(cfg);
    const auto trained = opt::train_policy(spec, program, t).second;
    std::vector<double> a;
    std::vector<double> b;
    std::vector<double> scratch_a(program.scratch_size());
    std::vector<double> scratch_b(human.scratch_size());
    std::vector<double> comps_a(program.size());
    std::vector<double> comps_b(human.size());
    for (const auto& tr : trained.transitions_sample) {
      a.push_back(program.evaluate_flat(tr.binding_after, scratch_a, comps_a));
      b.push_back(human.evaluate_flat(tr.binding_after, scratch_b, comps_b));
    }
    try {
      report["correlation_with_human"] = {{"pearson", metrics::pearson_correlation(a, b)}, {"transitions", a.size()}};
    } catch (const metrics::MetricError& e) {
      report["notes"].push_back(std::string("correlation undefined: ") + e.what());
    }
  }
  return report;
}

json compare_reports(const std::vector<json>& reports) {
  json runs = json::array();
  json pairs = json::array();
  std::vector<std::vector<double>> scores;
  for (const auto& r : reports) {
    std::vector<double> s;
    if (r["final"].is_object()) s = r["final"]["run_scores"].get<std::vector<double>>();
    runs.push_back({{"run_id", r["run_id"]},
                    {"final", r["final"].is_object() ? r["final"]["per_run_max"] : json(nullptr)},
                    {"iqm", s.size() >= 4 ? json(metrics::iqm(s)) : json(nullptr)},
                    {"normalized", r["normalized"]}});
    scores.push_back(std::move(s));
  }
  for (std::size_t i = 0; i < reports.size(); ++i) {
    for (std::size_t j = 0; j < reports.size(); ++j) {
      if (i == j || scores[i].empty() || scores[j].empty()) continue;
      pairs.push_back({{"run", reports[i]["run_id"]},
                       {"over", reports[j]["run_id"]},
                       {"prob_improvement", metrics::prob_improvement(scores[i], scores[j])}});
    }
  }
  json normalized = json::array();
  for (const auto& r : reports) {
    if (r["normalized"].is_object()) normalized.push_back(r["normalized"]);
  }
  json aggregate = nullptr;
  if (!normalized.empty()) {
    double raw = 0.0;
    double clipped = 0.0;
    for (const auto& n : normalized) {
      raw += n["raw"].get<double>();
      clipped += n["clipped"].get<double>();
    }
    aggregate = {{"mean_raw", raw / normalized.size()}, {"mean_clipped", clipped / normalized.size()}};
  }
  return {{"runs", runs}, {"pairs", pairs}, {"normalized_mean", aggregate}};
}

std::string render_report(const json& r) {
  std::string out = fmt::format("run {}  env {}  status {}  mode {}  ablation {}\n", r["run_id"].get<std::string>(),
                                r["env"].get<std::string>(), r["status"].get<std::string>(),
                                r["mode"].get<std::string>(), r["ablation"].get<std::string>());
  out += "best per iteration:";
  for (const auto& v : r["best_per_iteration"]) out += " " + fmt_opt(v);
  out += "\nbest so far (restart mean):";
  for (const auto& v : r["best_so_far_mean"]) out += " " + fmt_opt(v);
  out += "\n";
  if (r["overall_best"].is_object()) {
    out += fmt::format("overall best {}:\n", fmt_opt(r["overall_best"]["score"]));
    out += r["overall_best"]["program_text"].get<std::string>();
  }
  if (r["final"].is_object()) {
    const auto& f = r["final"];
    out += fmt::format("final  per-run max {}  pooled {}  iqm {}\n", fmt_opt(f["per_run_max"]), fmt_opt(f["pooled"]),
                       fmt_opt(f["stats"]["iqm"]));
  }
  if (r["baselines"].is_object()) {
    out += fmt::format("human {}  sparse {}\n", fmt_opt(r["baselines"]["human"]["score"]),
                       fmt_opt(r["baselines"]["sparse"]["score"]));
  }
  if (r["normalized"].is_object()) {
    out += fmt::format("human normalized score {}  (clipped {})\n", fmt_opt(r["normalized"]["raw"]),
                       fmt_opt(r["normalized"]["clipped"]));
  }
  if (r["correlation_with_human"].is_object()) {
    out += fmt::format("correlation with human reward {}\n", fmt_opt(r["correlation_with_human"]["pearson"]));
  }
  for (const auto& n : r["notes"]) out += "note: " + n.get<std::string>() + "\n";
  return out;
}

std::string render_comparison(const json& c) {
  std::string out = fmt::format("{:<24} {:>10} {:>10} {:>12}\n", "run", "final", "iqm", "normalized");
  for (const auto& r : c["runs"]) {
    out += fmt::format("{:<24} {:>10} {:>10} {:>12}\n", r["run_id"].get<std::string>(), fmt_opt(r["final"]),
                       fmt_opt(r["iqm"]), r["normalized"].is_object() ? fmt_opt(r["normalized"]["raw"]) : "-");
  }
  for (const auto& p : c["pairs"]) {
    out += fmt::format("P({} > {}) = {:.3f}\n", p["run"].get<std::string>(), p["over"].get<std::string>(),
                       p["prob_improvement"].get<double>());
  }
  if (c["normalized_mean"].is_object()) {
    out += fmt::format("mean normalized score {} (clipped {})\n", fmt_opt(c["normalized_mean"]["mean_raw"]),
                       fmt_opt(c["normalized_mean"]["mean_clipped"]));
  }
  return out;
}

}  // namespace rewardevo::store
