#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rewardevo/dsl/program.hpp"

namespace rewardevo::gen {

// The best candidate of the previous iteration and its feedback.
struct PriorCandidate {
  std::string program_text;  // canonical serialization
  std::optional<dsl::RewardProgram> program;
  std::string feedback;
};

struct GeneratorContext {
  std::string env_id;
  std::string env_context;
  std::string task_description;
  dsl::VarRegistry registry;
  std::optional<PriorCandidate> prior;
  int iteration = 0;
  // When false the prior program is shown as one summed expression so that
  // no component names reach the prompt.
  bool expose_components = true;
  std::uint64_t sample_seed = 0;       // stream for seeded generators
  std::uint64_t samples_consumed = 0;  // proposals drawn earlier in the run
};

struct ChatMessage {
  std::string role;
  std::string content;
  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct PromptBundle {
  std::string system;
  std::string user;
  std::string formatting_tip;

  std::vector<ChatMessage> messages() const;
  friend bool operator==(const PromptBundle&, const PromptBundle&) = default;
};

PromptBundle assemble_prompt(const GeneratorContext& ctx);

// Prior program text as it appears in prompts.
std::string render_prior_program(const PriorCandidate& prior, bool expose_components);

struct Proposal {
  std::string raw_text;
  std::string program_text;  // canonical when program is set, else the extracted text
  std::optional<dsl::RewardProgram> program;
  std::optional<dsl::ParseError> error;
};

class ExtractionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// First fenced code block, else the lines shaped like "name = expr".
std::string extract_program_text(std::string_view response);

// Extracts and parses; failures are recorded on the proposal.
Proposal make_proposal(std::string raw_text, const dsl::VarRegistry& registry);

class GeneratorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::string_view kind() const noexcept = 0;
  // Exactly k proposals, in sample order.
  virtual std::vector<Proposal> propose(const GeneratorContext& ctx, int k, double temperature) = 0;
};

}  // namespace rewardevo::gen
