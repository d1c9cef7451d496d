#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "rewardevo/env/environment.hpp"
#include "rewardevo/evo/config.hpp"
#include "rewardevo/evo/record.hpp"
#include "rewardevo/gen/generator.hpp"
#include "rewardevo/opt/trainer.hpp"

namespace rewardevo::evo {

// Receives every event before it is applied to the in-memory record. Must
// assign the next sequence number and make the event durable before
// returning.
class EventSink {
 public:
  virtual ~EventSink() = default;
  virtual void append(Event& event) = 0;
};

class MemorySink final : public EventSink {
 public:
  void append(Event& event) override {
    event.seq = ++last_seq_;
    events_.push_back(event);
  }
  const std::vector<Event>& events() const noexcept { return events_; }

 private:
  std::uint64_t last_seq_ = 0;
  std::vector<Event> events_;
};

struct Evaluation {
  double score = 0.0;                        // mean final fitness over runs
  std::vector<double> run_scores;
  std::vector<opt::TrainingReport> reports;  // one per run, transitions dropped
  opt::Policy policy;                        // policy of the first run
};

class CandidateEvaluator {
 public:
  virtual ~CandidateEvaluator() = default;
  // Run i trains with trainer.seed = seed + i. May throw opt::TrainingFailure.
  virtual Evaluation evaluate(const env::EnvironmentSpec& spec, const dsl::RewardProgram& program,
                              const opt::TrainerConfig& trainer, std::uint64_t seed, int runs) = 0;
};

class TrainingEvaluator final : public CandidateEvaluator {
 public:
  Evaluation evaluate(const env::EnvironmentSpec& spec, const dsl::RewardProgram& program,
                      const opt::TrainerConfig& trainer, std::uint64_t seed, int runs) override;
};

// Looks scores up by canonical program text instead of training; used to
// replay recorded searches. Reports hold a constant fitness series.
class ScoreTableEvaluator final : public CandidateEvaluator {
 public:
  explicit ScoreTableEvaluator(std::map<std::string, double> scores) : scores_(std::move(scores)) {}
  Evaluation evaluate(const env::EnvironmentSpec& spec, const dsl::RewardProgram& program,
                      const opt::TrainerConfig& trainer, std::uint64_t seed, int runs) override;

 private:
  std::map<std::string, double> scores_;
};

// Builds the table from replay entries that carry a score and parse against
// the registry.
std::map<std::string, double> score_table(const std::vector<std::pair<std::string, std::optional<double>>>& entries,
                                          const dsl::VarRegistry& registry);

struct SearchServices {
  gen::Generator& generator;
  CandidateEvaluator& evaluator;
  EventSink& sink;
};

// Seeds of the streams a search draws from.
std::uint64_t generator_seed(const EvolutionConfig& cfg, int restart, int iteration);
std::uint64_t training_seed(const EvolutionConfig& cfg, int restart, int iteration);
std::uint64_t final_seed(const EvolutionConfig& cfg);

// Starts a search and runs it until it finishes, fails (generator transport
// errors are recorded as run_failed) or pauses for human feedback.
RunRecord run_search(const std::string& run_id, const std::string& env_id, const EvolutionConfig& cfg,
                     SearchServices services);

// Continues a search from whatever its record already contains.
RunRecord resume_search(RunRecord record, SearchServices services);

class FeedbackRejected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Records `text` as the feedback for the last best candidate. Throws
// FeedbackRejected unless the run is paused for feedback.
RunRecord attach_human_feedback(RunRecord record, const std::string& text, EventSink& sink);

// attach_human_feedback followed by resume_search: one new candidate is
// proposed, trained and recorded, then the run pauses again or finishes.
RunRecord run_human_feedback_step(RunRecord record, const std::string& text, SearchServices services);

struct StageResult {
  double fitness = 0.0;  // mean final fitness over the runs
  std::vector<double> run_scores;
};

struct CurriculumOutcome {
  RunRecord stage_a;
  std::string program_text;       // stage-A best, reused verbatim in stage B
  opt::Policy pretrained;         // stage-A policy trained with that program
  double pretrained_direct = 0.0; // pretrained policy evaluated on stage B, no training
  StageResult fine_tuned;
  StageResult scratch;
};

struct CurriculumStage {
  std::string env_id;
  EvolutionConfig cfg;
};

// Stage A is a full search. Stage B trains the stage-A best program on the
// stage-B environment twice per seed: warm-started from the stage-A policy
// and from scratch. Stage B uses cfg.trainer and cfg.final_runs of stage B;
// zero generations evaluates the warm start directly. Throws
// std::invalid_argument when the registries differ.
CurriculumOutcome run_curriculum(const CurriculumStage& stage_a, const CurriculumStage& stage_b,
                                 SearchServices services);

}  // namespace rewardevo::evo
