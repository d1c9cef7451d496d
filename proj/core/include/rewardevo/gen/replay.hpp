#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rewardevo/gen/generator.hpp"

namespace rewardevo::gen {

struct ReplayEntry {
  std::string response;
  std::optional<double> score;  // recorded task score, absent for failed candidates
};

// Recorded responses in sample order. Loads either a fixture document
// {"entries": [{"response": ..., "score": ...}, ...]} or a JSONL capture
// written by the LLM client (one line per request; every choice becomes an
// entry).
struct ReplayFixture {
  std::vector<ReplayEntry> entries;

  static ReplayFixture from_json(const nlohmann::json& doc);
  static ReplayFixture load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

// Returns fixture entries starting at ctx.samples_consumed, so a resumed run
// continues where the previous process stopped.
class ReplayGenerator final : public Generator {
 public:
  explicit ReplayGenerator(ReplayFixture fixture) : fixture_(std::move(fixture)) {}
  std::string_view kind() const noexcept override { return "replay"; }
  std::vector<Proposal> propose(const GeneratorContext& ctx, int k, double temperature) override;
  const ReplayFixture& fixture() const noexcept { return fixture_; }

 private:
  ReplayFixture fixture_;
};

}  // namespace rewardevo::gen
