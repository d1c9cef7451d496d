#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "rewardevo/dsl/registry.hpp"
#include "rewardevo/opt/trainer.hpp"

namespace rewardevo::evo {

enum class Ablation { none, no_evolution, no_reflection };
enum class SearchMode { automatic, human_init, human_feedback };

std::string_view to_string(Ablation a) noexcept;
std::string_view to_string(SearchMode m) noexcept;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct EvolutionConfig {
  int iterations = 5;
  int samples = 16;
  int restarts = 5;
  std::string generator_kind = "mock";
  opt::TrainerConfig trainer;
  int intermediate_runs = 1;
  int final_runs = 5;
  Ablation ablation = Ablation::none;
  int total_samples = 32;      // no_evolution only
  SearchMode mode = SearchMode::automatic;
  std::string human_program;   // human_init only
  double temperature = 1.0;
  std::uint64_t seed = 0;
  int workers = 1;             // concurrent candidate evaluations

  // Proposals requested per iteration.
  int samples_per_iteration() const noexcept {
    return ablation == Ablation::no_evolution ? total_samples : samples;
  }

  // Throws ConfigError.
  void validate() const;
  friend bool operator==(const EvolutionConfig&, const EvolutionConfig&) = default;
};

// Switches cfg to human_init with the given program. Throws dsl::ParseError
// if it does not parse against the registry.
EvolutionConfig apply_human_init(EvolutionConfig cfg, std::string_view human_program,
                                 const dsl::VarRegistry& registry);

// Strict converters: unknown keys and wrong types raise ConfigError.
nlohmann::json to_json(const opt::TrainerConfig& cfg);
opt::TrainerConfig trainer_config_from_json(const nlohmann::json& doc, opt::TrainerConfig base = {});
nlohmann::json to_json(const EvolutionConfig& cfg);
EvolutionConfig evolution_config_from_json(const nlohmann::json& doc, EvolutionConfig base = {});

}  // namespace rewardevo::evo
