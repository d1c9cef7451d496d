#include "rewardevo/evo/config.hpp"

#include <initializer_list>

#include "rewardevo/dsl/program.hpp"

namespace rewardevo::evo {
namespace {

using nlohmann::json;

void require_object(const json& doc, std::string_view what) {
  if (!doc.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
}

void reject_unknown(const json& doc, std::string_view what, std::initializer_list<std::string_view> known) {
  for (const auto& [key, value] : doc.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || key == k;
    if (!ok) throw ConfigError(std::string(what) + ": unknown key \"" + key + "\"");
  }
}

template <typename T>
void read(const json& doc, std::string_view what, const char* key, T& out) {
  auto it = doc.find(key);
  if (it == doc.end()) return;
  try {
    if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0)) throw ConfigError("");
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw ConfigError("");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw ConfigError("");
    } else {
      if (!it->is_string()) throw ConfigError("");
    }
    out = it->get<T>();
  } catch (const std::exception&) {
    throw ConfigError(std::string(what) + "." + key + " has the wrong type");
  }
}

}  // namespace

std::string_view to_string(Ablation a) noexcept {
  switch (a) {
    case Ablation::none: return "none";
    case Ablation::no_evolution: return "no_evolution";
    case Ablation::no_reflection: return "no_reflection";
  }
  return "none";
}

std::string_view to_string(SearchMode m) noexcept {
  switch (m) {
    case SearchMode::automatic: return "auto";
    case SearchMode::human_init: return "human_init";
    case SearchMode::human_feedback: return "human_feedback";
  }
  return "auto";
}

void EvolutionConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("evolution config: " + msg); };
  if (iterations < 1) fail("iterations must be at least 1");
  if (samples < 1) fail("samples must be at least 1");
  if (restarts < 1) fail("restarts must be at least 1");
  if (intermediate_runs < 1) fail("intermediate_runs must be at least 1");
  if (final_runs < 1) fail("final_runs must be at least 1");
  if (workers < 1) fail("workers must be at least 1");
  if (!(temperature >= 0.0)) fail("temperature must be non-negative");
  if (ablation == Ablation::no_evolution) {
    if (iterations != 1) fail("no_evolution requires iterations = 1");
    if (total_samples < 1) fail("total_samples must be at least 1");
  }
  if (mode == SearchMode::human_feedback) {
    if (samples != 1) fail("human_feedback requires samples = 1");
    if (restarts != 1) fail("human_feedback requires restarts = 1");
    if (ablation != Ablation::none) fail("human_feedback cannot be combined with an ablation");
  }
  if (mode == SearchMode::human_init && human_program.empty()) fail("human_init requires a program");
  if (mode != SearchMode::human_init && !human_program.empty()) fail("human_program is only used by human_init");
  try {
    trainer.validate();
  } catch (const std::invalid_argument& err) {
    throw ConfigError(err.what());
  }
}

EvolutionConfig apply_human_init(EvolutionConfig cfg, std::string_view human_program,
                                 const dsl::VarRegistry& registry) {
  const auto program = dsl::parse_program(human_program, registry);
  cfg.mode = SearchMode::human_init;
  cfg.human_program = dsl::serialize_program(program);
  return cfg;
}

nlohmann::json to_json(const opt::TrainerConfig& cfg) {
  return {{"population", cfg.population},
          {"elite_fraction", cfg.elite_fraction},
          {"generations", cfg.generations},
          {"rollouts_per_candidate", cfg.rollouts_per_candidate},
          {"checkpoints", cfg.checkpoints},
          {"noise_floor", cfg.noise_floor},
          {"seed", cfg.seed},
          {"initial_std", cfg.initial_std},
          {"eval_episodes", cfg.eval_episodes},
          {"time_budget_s", cfg.time_budget_s},
          {"transition_sample_cap", cfg.transition_sample_cap},
          {"workers", cfg.workers}};
}

opt::TrainerConfig trainer_config_from_json(const nlohmann::json& doc, opt::TrainerConfig cfg) {
  constexpr std::string_view what = "trainer";
  require_object(doc, what);
  reject_unknown(doc, what,
                 {"population", "elite_fraction", "generations", "rollouts_per_candidate", "checkpoints",
                  "noise_floor", "seed", "initial_std", "eval_episodes", "time_budget_s", "transition_sample_cap",
                  "workers"});
  read(doc, what, "population", cfg.population);
  read(doc, what, "elite_fraction", cfg.elite_fraction);
  read(doc, what, "generations", cfg.generations);
  read(doc, what, "rollouts_per_candidate", cfg.rollouts_per_candidate);
  read(doc, what, "checkpoints", cfg.checkpoints);
  read(doc, what, "noise_floor", cfg.noise_floor);
  read(doc, what, "seed", cfg.seed);
  read(doc, what, "initial_std", cfg.initial_std);
  read(doc, what, "eval_episodes", cfg.eval_episodes);
  read(doc, what, "time_budget_s", cfg.time_budget_s);
  read(doc, what, "transition_sample_cap", cfg.transition_sample_cap);
  read(doc, what, "workers", cfg.workers);
  return cfg;
}

nlohmann::json to_json(const EvolutionConfig& cfg) {
  return {{"iterations", cfg.iterations},
          {"samples", cfg.samples},
          {"restarts", cfg.restarts},
          {"generator_kind", cfg.generator_kind},
          {"trainer", to_json(cfg.trainer)},
          {"intermediate_runs", cfg.intermediate_runs},
          {"final_runs", cfg.final_runs},
          {"ablation", to_string(cfg.ablation)},
          {"total_samples", cfg.total_samples},
          {"mode", to_string(cfg.mode)},
          {"human_program", cfg.human_program},
          {"temperature", cfg.temperature},
          {"seed", cfg.seed},
          {"workers", cfg.workers}};
}

EvolutionConfig evolution_config_from_json(const nlohmann::json& doc, EvolutionConfig cfg) {
  constexpr std::string_view what = "evolution";
  require_object(doc, what);
  reject_unknown(doc, what,
                 {"iterations", "samples", "restarts", "generator_kind", "trainer", "intermediate_runs", "final_runs",
                  "ablation", "total_samples", "mode", "human_program", "temperature", "seed", "workers"});
  read(doc, what, "iterations", cfg.iterations);
  read(doc, what, "samples", cfg.samples);
  read(doc, what, "restarts", cfg.restarts);
  read(doc, what, "generator_kind", cfg.generator_kind);
  if (auto it = doc.find("trainer"); it != doc.end()) cfg.trainer = trainer_config_from_json(*it, cfg.trainer);
  read(doc, what, "intermediate_runs", cfg.intermediate_runs);
  read(doc, what, "final_runs", cfg.final_runs);
  read(doc, what, "total_samples", cfg.total_samples);
  read(doc, what, "human_program", cfg.human_program);
  read(doc, what, "temperature", cfg.temperature);
  read(doc, what, "seed", cfg.seed);
  read(doc, what, "workers", cfg.workers);

  std::string ablation(to_string(cfg.ablation));
  read(doc, what, "ablation", ablation);
  if (ablation == "none") {
    cfg.ablation = Ablation::none;
  } else if (ablation == "no_evolution") {
    cfg.ablation = Ablation::no_evolution;
  } else if (ablation == "no_reflection") {
    cfg.ablation = Ablation::no_reflection;
  } else {
    throw ConfigError("evolution.ablation must be none, no_evolution or no_reflection");
  }

  std::string mode(to_string(cfg.mode));
  read(doc, what, "mode", mode);
  if (mode == "auto") {
    cfg.mode = SearchMode::automatic;
  } else if (mode == "human_init") {
    cfg.mode = SearchMode::human_init;
  } else if (mode == "human_feedback") {
    cfg.mode = SearchMode::human_feedback;
  } else {
    throw ConfigError("evolution.mode must be auto, human_init or human_feedback");
  }
  return cfg;
}

}  // namespace rewardevo::evo
