#include "rewardevo/gen/llm.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace rewardevo::gen {
namespace {

using nlohmann::json;

bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

ChatClient::ChatClient(LlmConfig config) : config_(std::move(config)) {
  const std::string& base = config_.api_base;
  const auto scheme_end = base.find("://");
  if (scheme_end == std::string::npos) throw GeneratorError("api_base must start with http:// or https://");
  const auto path_start = base.find('/', scheme_end + 3);
  scheme_host_port_ = base.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : base.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  if (config_.max_retries < 0) throw GeneratorError("max_retries must be non-negative");
}

std::string ChatClient::post(const std::string& body) {
  httplib::Client client(scheme_host_port_);
  const auto timeout = std::chrono::duration<double>(config_.request_timeout_s);
  const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(timeout).count();
  client.set_connection_timeout(0, static_cast<time_t>(std::min<long long>(usec, 30'000'000)));
  client.set_read_timeout(static_cast<time_t>(usec / 1'000'000), static_cast<time_t>(usec % 1'000'000));
  client.set_write_timeout(static_cast<time_t>(usec / 1'000'000), static_cast<time_t>(usec % 1'000'000));

  httplib::Headers headers;
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key != '\0') {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }

  std::string last_error;
  double backoff = config_.retry_backoff_s;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
      backoff *= 2.0;
    }
    auto res = client.Post(path_prefix_ + "/chat/completions", headers, body, "application/json");
    if (!res) {
      last_error = "request failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) return res->body;
    last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 500);
    if (!retryable_status(res->status)) break;
  }
  throw TransportError("chat completion failed after retries: " + last_error);
}

std::vector<std::string> ChatClient::complete(const std::vector<ChatMessage>& messages, int n, double temperature) {
  if (n < 1) throw GeneratorError("n must be at least 1");
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});

  std::vector<std::string> out;
  int empty_replies = 0;
  while (static_cast<int>(out.size()) < n) {
    const int want = n - static_cast<int>(out.size());
    const json request = {{"model", config_.model}, {"messages", msgs}, {"temperature", temperature}, {"n", want}};
    const std::string body = post(request.dump());

    json response;
    try {
      response = json::parse(body);
    } catch (const json::parse_error& err) {
      throw TransportError(std::string("chat completion response is not JSON: ") + err.what());
    }
    if (!config_.capture_path.empty()) {
      std::lock_guard lock(capture_mutex_);
      std::ofstream capture(config_.capture_path, std::ios::app | std::ios::binary);
      capture << json{{"request", request}, {"response", response}}.dump() << '\n';
    }

    std::vector<std::pair<int, std::string>> choices;
    if (auto it = response.find("choices"); it != response.end() && it->is_array()) {
      for (const auto& choice : *it) {
        const int index = choice.value("index", static_cast<int>(choices.size()));
        const auto content = choice.contains("message") ? choice["message"].value("content", std::string{})
                                                        : std::string{};
        choices.emplace_back(index, content);
      }
    }
    std::stable_sort(choices.begin(), choices.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    if (choices.empty() && ++empty_replies > config_.max_retries) {
      throw TransportError("chat completion returned no choices");
    }
    for (auto& [index, content] : choices) {
      if (static_cast<int>(out.size()) < n) out.push_back(std::move(content));
    }
  }
  return out;
}

std::vector<Proposal> LlmGenerator::propose(const GeneratorContext& ctx, int k, double temperature) {
  if (k < 1) throw GeneratorError("k must be at least 1");
  const auto responses = client_.complete(assemble_prompt(ctx).messages(), k, temperature);
  std::vector<Proposal> out;
  out.reserve(responses.size());
  for (const auto& r : responses) out.push_back(make_proposal(r, ctx.registry));
  return out;
}

}  // namespace rewardevo::gen
