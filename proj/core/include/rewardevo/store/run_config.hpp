#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "rewardevo/evo/config.hpp"
#include "rewardevo/evo/search.hpp"
#include "rewardevo/gen/generator.hpp"
#include "rewardevo/gen/llm.hpp"

namespace rewardevo::store {

struct GeneratorSettings {
  std::string kind = "mock";  // mock | llm | replay | l2r
  gen::LlmConfig llm;
  std::string fixture;        // replay only; relative paths resolve against the config file
  std::string selector = "mock";  // l2r stage one: mock | llm

  friend bool operator==(const GeneratorSettings&, const GeneratorSettings&) = default;
};

// The run config file. Top-level "seed", "trainer", generator.kind and
// generator.temperature override the matching fields of "evolution".
struct RunConfig {
  std::string env;
  GeneratorSettings generator;
  evo::EvolutionConfig evolution;
  std::string out_dir = "runs";
  std::string run_id;                 // empty: chosen by the caller
  std::string evaluator = "training"; // training | replay_scores

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Throws evo::ConfigError on unknown keys, wrong types, unknown environments
// or generators, and on evolution settings that fail validation. A
// human_init run without a program uses the environment's Human fixture.
RunConfig run_config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const RunConfig& cfg);
RunConfig load_run_config(const std::filesystem::path& path);

// Generator and evaluator described by the config. Owned together because the
// score-table evaluator is built from the replay fixture.
struct Services {
  std::unique_ptr<gen::Generator> generator;
  std::unique_ptr<evo::CandidateEvaluator> evaluator;
};

Services make_services(const RunConfig& cfg);

}  // namespace rewardevo::store
