#include "rewardevo/store/run_config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include "rewardevo/env/environment.hpp"
#include "rewardevo/gen/l2r.hpp"
#include "rewardevo/gen/mock.hpp"
#include "rewardevo/gen/replay.hpp"

namespace rewardevo::store {
namespace {

using nlohmann::json;
using evo::ConfigError;

void check_keys(const json& doc, const std::string& what, std::initializer_list<std::string_view> known) {
  if (!doc.is_object()) throw ConfigError(what + " must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || key == k;
    if (!ok) throw ConfigError(what + ": unknown key \"" + key + "\"");
  }
}

std::string get_string(const json& doc, const std::string& what, const char* key, std::string fallback) {
  auto it = doc.find(key);
  if (it == doc.end()) return fallback;
  if (!it->is_string()) throw ConfigError(what + "." + key + " must be a string");
  return it->get<std::string>();
}

double get_number(const json& doc, const std::string& what, const char* key, double fallback) {
  auto it = doc.find(key);
  if (it == doc.end()) return fallback;
  if (!it->is_number()) throw ConfigError(what + "." + key + " must be a number");
  return it->get<double>();
}

int get_int(const json& doc, const std::string& what, const char* key, int fallback) {
  auto it = doc.find(key);
  if (it == doc.end()) return fallback;
  if (!it->is_number_integer()) throw ConfigError(what + "." + key + " must be an integer");
  return it->get<int>();
}

GeneratorSettings generator_from_json(const json& doc, const std::filesystem::path& base_dir, double& temperature) {
  const std::string what = "generator";
  check_keys(doc, what,
             {"kind", "model", "api_base", "api_key_env", "temperature", "request_timeout_s", "max_retries",
              "retry_backoff_s", "capture", "fixture", "selector"});
  GeneratorSettings g;
  g.kind = get_string(doc, what, "kind", g.kind);
  if (g.kind != "mock" && g.kind != "llm" && g.kind != "replay" && g.kind != "l2r") {
    throw ConfigError("generator.kind must be mock, llm, replay or l2r");
  }
  g.llm.model = get_string(doc, what, "model", g.llm.model);
  g.llm.api_base = get_string(doc, what, "api_base", g.llm.api_base);
  g.llm.api_key_env = get_string(doc, what, "api_key_env", g.llm.api_key_env);
  g.llm.request_timeout_s = get_number(doc, what, "request_timeout_s", g.llm.request_timeout_s);
  g.llm.max_retries = get_int(doc, what, "max_retries", g.llm.max_retries);
  g.llm.retry_backoff_s = get_number(doc, what, "retry_backoff_s", g.llm.retry_backoff_s);
  g.llm.capture_path = get_string(doc, what, "capture", g.llm.capture_path);
  g.fixture = get_string(doc, what, "fixture", g.fixture);
  g.selector = get_string(doc, what, "selector", g.selector);
  temperature = get_number(doc, what, "temperature", temperature);

  if (g.llm.request_timeout_s <= 0.0) throw ConfigError("generator.request_timeout_s must be positive");
  if (g.llm.max_retries < 1) throw ConfigError("generator.max_retries must be at least 1");
  if (g.selector != "mock" && g.selector != "llm") throw ConfigError("generator.selector must be mock or llm");
  if (g.kind == "replay" && g.fixture.empty()) throw ConfigError("generator.fixture is required for replay");
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative() && !base_dir.empty()) p = (base_dir / p).string();
  };
  resolve(g.fixture);
  resolve(g.llm.capture_path);
  return g;
}

}  // namespace

RunConfig run_config_from_json(const json& doc, const std::filesystem::path& base_dir) {
  check_keys(doc, "config", {"env", "generator", "evolution", "trainer", "seed", "out_dir", "run_id", "evaluator"});
  RunConfig cfg;
  cfg.env = get_string(doc, "config", "env", "");
  if (cfg.env.empty()) throw ConfigError("config.env is required");
  try {
    env::get_environment(cfg.env);
  } catch (const env::EnvironmentError& e) {
    throw ConfigError(std::string("config.env: ") + e.what());
  }
  if (auto it = doc.find("evolution"); it != doc.end()) cfg.evolution = evo::evolution_config_from_json(*it);
  if (auto it = doc.find("trainer"); it != doc.end()) {
    cfg.evolution.trainer = evo::trainer_config_from_json(*it, cfg.evolution.trainer);
  }
  if (auto it = doc.find("seed"); it != doc.end()) {
    if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0)) throw ConfigError("config.seed must be a non-negative integer");
    cfg.evolution.seed = it->get<std::uint64_t>();
  }
  double temperature = cfg.evolution.temperature;
  if (auto it = doc.find("generator"); it != doc.end()) cfg.generator = generator_from_json(*it, base_dir, temperature);
  cfg.evolution.temperature = temperature;
  cfg.evolution.generator_kind = cfg.generator.kind;
  cfg.out_dir = get_string(doc, "config", "out_dir", cfg.out_dir);
  cfg.run_id = get_string(doc, "config", "run_id", cfg.run_id);
  cfg.evaluator = get_string(doc, "config", "evaluator", cfg.evaluator);
  if (cfg.evaluator != "training" && cfg.evaluator != "replay_scores") {
    throw ConfigError("config.evaluator must be training or replay_scores");
  }
  if (cfg.evaluator == "replay_scores" && cfg.generator.kind != "replay") {
    throw ConfigError("config.evaluator replay_scores needs the replay generator");
  }
  if (!cfg.run_id.empty() && (cfg.run_id.find('/') != std::string::npos || cfg.run_id.starts_with("."))) {
    throw ConfigError("config.run_id must be a plain directory name");
  }

  const auto& spec = env::get_environment(cfg.env).spec();
  if (cfg.evolution.mode == evo::SearchMode::human_init) {
    const std::string program = cfg.evolution.human_program.empty() ? spec.human_reward : cfg.evolution.human_program;
    try {
      cfg.evolution = evo::apply_human_init(cfg.evolution, program, spec.registry);
    } catch (const dsl::ParseError& e) {
      throw ConfigError(std::string("evolution.human_program: ") + e.what());
    }
  }
  cfg.evolution.validate();
  return cfg;
}

json to_json(const RunConfig& cfg) {
  auto evolution = evo::to_json(cfg.evolution);
  json trainer = evolution["trainer"];
  const auto seed = cfg.evolution.seed;
  for (const char* key : {"trainer", "seed", "generator_kind", "temperature"}) evolution.erase(key);
  json generator = {{"kind", cfg.generator.kind},
                    {"model", cfg.generator.llm.model},
                    {"api_base", cfg.generator.llm.api_base},
                    {"api_key_env", cfg.generator.llm.api_key_env},
                    {"temperature", cfg.evolution.temperature},
                    {"request_timeout_s", cfg.generator.llm.request_timeout_s},
                    {"max_retries", cfg.generator.llm.max_retries},
                    {"retry_backoff_s", cfg.generator.llm.retry_backoff_s},
                    {"capture", cfg.generator.llm.capture_path},
                    {"fixture", cfg.generator.fixture},
                    {"selector", cfg.generator.selector}};
  return {{"env", cfg.env},         {"generator", generator},  {"evolution", evolution},
          {"trainer", trainer},     {"seed", seed},            {"out_dir", cfg.out_dir},
          {"run_id", cfg.run_id},   {"evaluator", cfg.evaluator}};
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  json doc;
  try {
    doc = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(doc, path.parent_path());
}

Services make_services(const RunConfig& cfg) {
  Services s;
  if (cfg.generator.kind == "mock") {
    s.generator = std::make_unique<gen::MockGenerator>();
  } else if (cfg.generator.kind == "llm") {
    s.generator = std::make_unique<gen::LlmGenerator>(cfg.generator.llm);
  } else if (cfg.generator.kind == "l2r") {
    std::unique_ptr<gen::StatementSelector> selector;
    if (cfg.generator.selector == "llm") selector = std::make_unique<gen::LlmStatementSelector>(cfg.generator.llm);
    else selector = std::make_unique<gen::MockStatementSelector>();
    s.generator = std::make_unique<gen::L2RGenerator>(std::move(selector));
  } else {
    gen::ReplayFixture fixture;
    try {
      fixture = gen::ReplayFixture::load(cfg.generator.fixture);
    } catch (const std::exception& e) {
      throw ConfigError("generator.fixture: " + std::string(e.what()));
    }
    if (cfg.evaluator == "replay_scores") {
      std::vector<std::pair<std::string, std::optional<double>>> entries;
      for (const auto& e : fixture.entries) entries.emplace_back(e.response, e.score);
      s.evaluator = std::make_unique<evo::ScoreTableEvaluator>(
          evo::score_table(entries, env::get_environment(cfg.env).spec().registry));
    }
    s.generator = std::make_unique<gen::ReplayGenerator>(std::move(fixture));
  }
  if (!s.evaluator) s.evaluator = std::make_unique<evo::TrainingEvaluator>();
  return s;
}

}  // namespace rewardevo::store
