#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rewardevo/dsl/program.hpp"
#include "rewardevo/evo/config.hpp"
#include "rewardevo/opt/trainer.hpp"

namespace rewardevo::evo {

enum class EventType {
  run_started,
  proposals_requested,
  candidate_proposed,
  candidate_scored,
  iteration_closed,
  feedback_attached,
  run_failed,
  run_finished,
};

std::string_view to_string(EventType type) noexcept;
EventType event_type_from_string(std::string_view name);

struct Event {
  std::uint64_t seq = 0;  // assigned by the sink, starts at 1
  EventType type = EventType::run_started;
  nlohmann::json data;

  nlohmann::json to_json() const;
  static Event from_json(const nlohmann::json& doc);
  friend bool operator==(const Event&, const Event&) = default;
};

enum class RunStatus { running, paused_for_feedback, finished, failed };
std::string_view to_string(RunStatus status) noexcept;

// Raised when events cannot be applied: malformed payloads, out-of-order
// sequence numbers, duplicate candidates, or recorded best scores that
// disagree with the candidates.
class RecordError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CandidateRef {
  int restart = 0;
  int iteration = 0;
  int sample = 0;
  friend bool operator==(const CandidateRef&, const CandidateRef&) = default;
};

struct Candidate {
  CandidateRef index;
  std::string source;        // "generator" or "human"
  std::string raw_text;
  std::string program_text;  // canonical when program is set
  std::optional<dsl::RewardProgram> program;
  std::optional<dsl::ParseError> error;
  std::optional<double> score;
  std::vector<double> run_scores;
  std::optional<opt::TrainingReport> report;  // without transitions
  std::string training_error;
  std::string feedback;  // reflection, fitness-only text or failure feedback
  bool scored = false;   // training attempted (score may still be absent)

  bool failed() const noexcept { return !program || (scored && !score); }
};

struct PromptRecord {
  int k = 0;
  std::uint64_t sample_seed = 0;
  std::uint64_t samples_consumed = 0;
  std::string system;
  std::string user;
};

struct IterationRecord {
  int restart = 0;
  int iteration = 0;
  std::optional<PromptRecord> prompt;  // absent when no generator call was made
  std::vector<Candidate> candidates;
  bool closed = false;
  std::optional<int> best_sample;
  std::optional<double> best_score;
  std::optional<double> restart_best_score;  // best within this restart so far
  std::string feedback;                      // carried into the next prompt
  std::optional<std::string> human_feedback;

  const Candidate* find(int sample) const noexcept;
};

struct BestCandidate {
  CandidateRef ref;
  std::string program_text;
  double score = 0.0;
};

struct FinalScore {
  CandidateRef ref;
  double score = 0.0;  // mean over runs
  std::vector<double> run_scores;
  std::vector<std::vector<double>> run_checkpoint_fitness;
};

// State of one search, rebuilt purely from its events.
class RunRecord {
 public:
  RunRecord() = default;

  // Applies events in order; throws RecordError on any violation.
  static RunRecord replay(const std::vector<Event>& events);
  void apply(const Event& event);

  const std::vector<Event>& events() const noexcept { return events_; }
  std::uint64_t last_seq() const noexcept { return events_.empty() ? 0 : events_.back().seq; }

  const std::string& run_id() const noexcept { return run_id_; }
  const std::string& env_id() const noexcept { return env_id_; }
  const EvolutionConfig& config() const noexcept { return config_; }
  RunStatus status() const noexcept { return status_; }
  const std::string& failure() const noexcept { return failure_; }

  const std::vector<IterationRecord>& iterations() const noexcept { return iterations_; }
  const IterationRecord* find_iteration(int restart, int iteration) const noexcept;
  const Candidate* find_candidate(const CandidateRef& ref) const noexcept;

  // Best score of each closed iteration, in record order; absent when every
  // candidate of the iteration failed.
  std::vector<std::optional<double>> best_per_iteration() const;
  // Highest intermediate score so far; first occurrence wins ties.
  const std::optional<BestCandidate>& overall_best() const noexcept { return overall_best_; }
  const std::optional<FinalScore>& final_score() const noexcept { return final_; }

  // Proposals requested by all earlier generator calls.
  std::uint64_t samples_consumed() const noexcept { return samples_consumed_; }

  friend bool operator==(const RunRecord& a, const RunRecord& b) { return a.events_ == b.events_; }

 private:
  IterationRecord& iteration_for(int restart, int iteration, bool create);
  void check_index(int restart, int iteration) const;

  std::vector<Event> events_;
  std::string run_id_;
  std::string env_id_;
  EvolutionConfig config_;
  RunStatus status_ = RunStatus::running;
  std::string failure_;
  std::vector<IterationRecord> iterations_;
  std::optional<BestCandidate> overall_best_;
  std::optional<FinalScore> final_;
  std::uint64_t samples_consumed_ = 0;
};

// Report JSON without transitions.
nlohmann::json to_json(const opt::TrainingReport& report);
opt::TrainingReport training_report_from_json(const nlohmann::json& doc);

}  // namespace rewardevo::evo
