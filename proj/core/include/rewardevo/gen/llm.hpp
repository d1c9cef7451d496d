#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "rewardevo/gen/generator.hpp"

namespace rewardevo::gen {

struct LlmConfig {
  std::string api_base = "https://api.openai.com/v1";
  std::string model = "gpt-4";
  std::string api_key_env = "OPENAI_API_KEY";
  double request_timeout_s = 120.0;
  int max_retries = 3;
  double retry_backoff_s = 1.0;  // doubled after each failed attempt
  std::string capture_path;      // JSONL of request/response pairs; empty disables

  friend bool operator==(const LlmConfig&, const LlmConfig&) = default;
};

// Raised once all retries of a request have failed.
class TransportError : public GeneratorError {
 public:
  using GeneratorError::GeneratorError;
};

// Minimal OpenAI-compatible chat-completions client.
class ChatClient {
 public:
  explicit ChatClient(LlmConfig config);

  // n completions for the same messages. Issues one request with n choices
  // and tops up with further requests if the server returns fewer.
  std::vector<std::string> complete(const std::vector<ChatMessage>& messages, int n, double temperature);

  const LlmConfig& config() const noexcept { return config_; }

 private:
  std::string post(const std::string& body);

  LlmConfig config_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::mutex capture_mutex_;
};

class LlmGenerator final : public Generator {
 public:
  explicit LlmGenerator(LlmConfig config) : client_(std::move(config)) {}
  std::string_view kind() const noexcept override { return "llm"; }
  std::vector<Proposal> propose(const GeneratorContext& ctx, int k, double temperature) override;

 private:
  ChatClient client_;
};

}  // namespace rewardevo::gen
