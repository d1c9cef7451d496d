#include "rewardevo/gen/replay.hpp"

#include <fstream>
#include <sstream>

namespace rewardevo::gen {

ReplayFixture ReplayFixture::from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_array()) {
    throw GeneratorError("replay fixture must be an object with an \"entries\" array");
  }
  ReplayFixture fixture;
  for (const auto& item : doc["entries"]) {
    ReplayEntry entry;
    entry.response = item.at("response").get<std::string>();
    if (auto it = item.find("score"); it != item.end() && it->is_number()) entry.score = it->get<double>();
    fixture.entries.push_back(std::move(entry));
  }
  return fixture;
}

ReplayFixture ReplayFixture::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw GeneratorError("cannot open replay fixture " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  try {
    auto doc = nlohmann::json::parse(text, nullptr, true, false);
    if (doc.is_object() && doc.contains("entries")) return from_json(doc);
  } catch (const nlohmann::json::parse_error&) {
    // not a single document; try JSONL below
  }

  ReplayFixture fixture;
  std::istringstream lines(text);
  int line_no = 0;
  for (std::string line; std::getline(lines, line);) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto record = nlohmann::json::parse(line);
      for (const auto& choice : record.at("response").at("choices")) {
        fixture.entries.push_back({choice.at("message").at("content").get<std::string>(), std::nullopt});
      }
    } catch (const nlohmann::json::exception& err) {
      throw GeneratorError(path.string() + ":" + std::to_string(line_no) + ": " + err.what());
    }
  }
  return fixture;
}

nlohmann::json ReplayFixture::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& e : entries) {
    list.push_back({{"response", e.response}, {"score", e.score ? nlohmann::json(*e.score) : nlohmann::json()}});
  }
  return {{"entries", std::move(list)}};
}

std::vector<Proposal> ReplayGenerator::propose(const GeneratorContext& ctx, int k, double /*temperature*/) {
  if (k < 1) throw GeneratorError("k must be at least 1");
  const auto start = ctx.samples_consumed;
  if (start + static_cast<std::uint64_t>(k) > fixture_.entries.size()) {
    throw GeneratorError("replay fixture exhausted: " + std::to_string(k) + " samples requested at position " +
                         std::to_string(start) + " of " + std::to_string(fixture_.entries.size()));
  }
  std::vector<Proposal> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    out.push_back(make_proposal(fixture_.entries[start + static_cast<std::uint64_t>(i)].response, ctx.registry));
  }
  return out;
}

}  // namespace rewardevo::gen
