#include "rewardevo/evo/record.hpp"

#include <algorithm>

#include "rewardevo/env/environment.hpp"

namespace rewardevo::evo {
namespace {

using nlohmann::json;

constexpr std::pair<EventType, std::string_view> kEventNames[] = {
    {EventType::run_started, "run_started"},
    {EventType::proposals_requested, "proposals_requested"},
    {EventType::candidate_proposed, "candidate_proposed"},
    {EventType::candidate_scored, "candidate_scored"},
    {EventType::iteration_closed, "iteration_closed"},
    {EventType::feedback_attached, "feedback_attached"},
    {EventType::run_failed, "run_failed"},
    {EventType::run_finished, "run_finished"},
};

template <typename T>
T field(const json& data, const char* key) {
  auto it = data.find(key);
  if (it == data.end()) throw RecordError(std::string("event is missing \"") + key + "\"");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw RecordError(std::string("event field \"") + key + "\" has the wrong type");
  }
}

template <typename T>
std::optional<T> optional_field(const json& data, const char* key) {
  auto it = data.find(key);
  if (it == data.end() || it->is_null()) return std::nullopt;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw RecordError(std::string("event field \"") + key + "\" has the wrong type");
  }
}

bool same(const std::optional<double>& a, const std::optional<double>& b) {
  return a.has_value() == b.has_value() && (!a || *a == *b);
}

}  // namespace

std::string_view to_string(EventType type) noexcept {
  for (const auto& [t, name] : kEventNames) {
    if (t == type) return name;
  }
  return "unknown";
}

EventType event_type_from_string(std::string_view name) {
  for (const auto& [t, n] : kEventNames) {
    if (n == name) return t;
  }
  throw RecordError("unknown event type \"" + std::string(name) + "\"");
}

std::string_view to_string(RunStatus status) noexcept {
  switch (status) {
    case RunStatus::running: return "running";
    case RunStatus::paused_for_feedback: return "paused_for_feedback";
    case RunStatus::finished: return "finished";
    case RunStatus::failed: return "failed";
  }
  return "running";
}

json Event::to_json() const { return {{"seq", seq}, {"type", evo::to_string(type)}, {"data", data}}; }

Event Event::from_json(const json& doc) {
  if (!doc.is_object()) throw RecordError("event is not a JSON object");
  Event e;
  e.seq = field<std::uint64_t>(doc, "seq");
  e.type = event_type_from_string(field<std::string>(doc, "type"));
  e.data = doc.contains("data") ? doc["data"] : json::object();
  if (!e.data.is_object()) throw RecordError("event data is not a JSON object");
  return e;
}

json to_json(const opt::TrainingReport& report) {
  json snaps = json::array();
  for (const auto& s : report.checkpoint_snapshots) {
    json comps = json::array();
    for (const auto& [name, value] : s.component_means) comps.push_back({name, value});
    snaps.push_back({{"generation", s.generation},
                     {"fitness", s.fitness},
                     {"component_means", comps},
                     {"episode_length_mean", s.episode_length_mean}});
  }
  return {{"checkpoint_snapshots", snaps},
          {"final_fitness", report.final_fitness},
          {"initial_fitness", report.initial_fitness},
          {"aborted", report.aborted},
          {"note", report.note}};
}

opt::TrainingReport training_report_from_json(const json& doc) {
  opt::TrainingReport report;
  for (const auto& s : field<json>(doc, "checkpoint_snapshots")) {
    opt::Snapshot snap;
    snap.generation = field<int>(s, "generation");
    snap.fitness = field<double>(s, "fitness");
    snap.episode_length_mean = field<double>(s, "episode_length_mean");
    for (const auto& c : field<json>(s, "component_means")) {
      if (!c.is_array() || c.size() != 2) throw RecordError("malformed component mean");
      snap.component_means.emplace_back(c[0].get<std::string>(), c[1].get<double>());
    }
    report.checkpoint_snapshots.push_back(std::move(snap));
  }
  report.final_fitness = field<double>(doc, "final_fitness");
  report.initial_fitness = field<double>(doc, "initial_fitness");
  report.aborted = field<bool>(doc, "aborted");
  report.note = field<std::string>(doc, "note");
  return report;
}

const Candidate* IterationRecord::find(int sample) const noexcept {
  for (const auto& c : candidates) {
    if (c.index.sample == sample) return &c;
  }
  return nullptr;
}

RunRecord RunRecord::replay(const std::vector<Event>& events) {
  RunRecord record;
  for (const auto& e : events) record.apply(e);
  return record;
}

const IterationRecord* RunRecord::find_iteration(int restart, int iteration) const noexcept {
  for (const auto& it : iterations_) {
    if (it.restart == restart && it.iteration == iteration) return &it;
  }
  return nullptr;
}

const Candidate* RunRecord::find_candidate(const CandidateRef& ref) const noexcept {
  const auto* it = find_iteration(ref.restart, ref.iteration);
  return it == nullptr ? nullptr : it->find(ref.sample);
}

std::vector<std::optional<double>> RunRecord::best_per_iteration() const {
  std::vector<std::optional<double>> out;
  for (const auto& it : iterations_) {
    if (it.closed) out.push_back(it.best_score);
  }
  return out;
}

void RunRecord::check_index(int restart, int iteration) const {
  if (restart < 0 || restart >= config_.restarts || iteration < 0 || iteration >= config_.iterations) {
    throw RecordError("iteration (" + std::to_string(restart) + ", " + std::to_string(iteration) +
                      ") is outside the configured search");
  }
}

IterationRecord& RunRecord::iteration_for(int restart, int iteration, bool create) {
  check_index(restart, iteration);
  if (!iterations_.empty() && iterations_.back().restart == restart && iterations_.back().iteration == iteration) {
    if (iterations_.back().closed) throw RecordError("iteration is already closed");
    return iterations_.back();
  }
  if (!create) throw RecordError("event refers to an iteration that is not open");
  // Iterations open strictly in order, each after its predecessor closed.
  int expect_restart = 0;
  int expect_iteration = 0;
  if (!iterations_.empty()) {
    const auto& last = iterations_.back();
    if (!last.closed) throw RecordError("previous iteration is still open");
    expect_restart = last.restart;
    expect_iteration = last.iteration + 1;
    if (expect_iteration == config_.iterations) {
      ++expect_restart;
      expect_iteration = 0;
    }
  }
  if (restart != expect_restart || iteration != expect_iteration) throw RecordError("iterations out of order");
  if (config_.mode == SearchMode::human_feedback && iteration > 0 &&
      (!iterations_.back().human_feedback || status_ == RunStatus::paused_for_feedback)) {
    throw RecordError("human_feedback iteration opened without feedback");
  }
  auto& rec = iterations_.emplace_back();
  rec.restart = restart;
  rec.iteration = iteration;
  return rec;
}

void RunRecord::apply(const Event& e) {
  if (e.seq <= last_seq()) {
    throw RecordError("sequence number " + std::to_string(e.seq) + " does not follow " + std::to_string(last_seq()));
  }
  if (events_.empty() != (e.type == EventType::run_started)) {
    throw RecordError("run_started must be the first event and appear once");
  }
  if (status_ == RunStatus::finished) throw RecordError("event after run_finished");
  const json& d = e.data;
  RunStatus next_status = RunStatus::running;

  switch (e.type) {
    case EventType::run_started: {
      run_id_ = field<std::string>(d, "run_id");
      env_id_ = field<std::string>(d, "env");
      try {
        env::get_environment(env_id_);
        config_ = evolution_config_from_json(field<json>(d, "config"));
        config_.validate();
      } catch (const RecordError&) {
        throw;
      } catch (const std::exception& err) {
        throw RecordError(std::string("invalid run_started event: ") + err.what());
      }
      break;
    }
    case EventType::proposals_requested: {
      auto& it = iteration_for(field<int>(d, "restart"), field<int>(d, "iteration"), true);
      if (it.prompt || !it.candidates.empty()) throw RecordError("duplicate proposals_requested");
      if (config_.mode == SearchMode::human_init && it.iteration == 0) {
        throw RecordError("human_init iteration 0 makes no generator call");
      }
      PromptRecord p;
      p.k = field<int>(d, "k");
      p.sample_seed = field<std::uint64_t>(d, "sample_seed");
      p.samples_consumed = field<std::uint64_t>(d, "samples_consumed");
      p.system = field<std::string>(d, "system");
      p.user = field<std::string>(d, "user");
      if (p.k != config_.samples_per_iteration()) throw RecordError("proposal count differs from the config");
      if (p.samples_consumed != samples_consumed_) throw RecordError("samples_consumed is inconsistent");
      samples_consumed_ += static_cast<std::uint64_t>(p.k);
      it.prompt = std::move(p);
      break;
    }
    case EventType::candidate_proposed: {
      const int r = field<int>(d, "restart");
      const int n = field<int>(d, "iteration");
      const bool human = field<std::string>(d, "source") == "human";
      auto& it = iteration_for(r, n, human);
      Candidate c;
      c.index = {r, n, field<int>(d, "sample")};
      c.source = human ? "human" : "generator";
      if (human) {
        if (config_.mode != SearchMode::human_init || n != 0 || c.index.sample != 0) {
          throw RecordError("human candidates only occupy sample 0 of iteration 0 in human_init mode");
        }
      } else if (!it.prompt || c.index.sample < 0 || c.index.sample >= it.prompt->k) {
        throw RecordError("generated candidate without a matching proposals_requested event");
      }
      if (it.find(c.index.sample) != nullptr) {
        throw RecordError("duplicate candidate index " + std::to_string(c.index.sample));
      }
      c.raw_text = field<std::string>(d, "raw_text");
      c.program_text = field<std::string>(d, "program_text");
      c.feedback = d.value("feedback", std::string{});
      if (auto err = optional_field<json>(d, "error")) {
        c.error = dsl::ParseError(field<int>(*err, "line"), field<int>(*err, "column"),
                                  field<std::string>(*err, "message"));
      } else {
        try {
          c.program = dsl::parse_program(c.program_text, env::get_environment(env_id_).spec().registry);
        } catch (const dsl::ParseError& err) {
          throw RecordError("recorded program does not parse: " + err.message());
        }
        if (dsl::serialize_program(*c.program) != c.program_text) throw RecordError("program text is not canonical");
      }
      // Candidates are recorded in sample order.
      if (!it.candidates.empty() && it.candidates.back().index.sample >= c.index.sample) {
        throw RecordError("candidates out of order");
      }
      it.candidates.push_back(std::move(c));
      break;
    }
    case EventType::candidate_scored: {
      auto& it = iteration_for(field<int>(d, "restart"), field<int>(d, "iteration"), false);
      const int sample = field<int>(d, "sample");
      auto pos = std::find_if(it.candidates.begin(), it.candidates.end(),
                              [&](const Candidate& c) { return c.index.sample == sample; });
      if (pos == it.candidates.end() || !pos->program) throw RecordError("scored candidate has no program");
      if (pos->scored) throw RecordError("candidate scored twice");
      pos->scored = true;
      pos->score = optional_field<double>(d, "score");
      pos->run_scores = d.value("run_scores", std::vector<double>{});
      pos->training_error = d.value("training_error", std::string{});
      pos->feedback = field<std::string>(d, "feedback");
      if (auto report = optional_field<json>(d, "report")) pos->report = training_report_from_json(*report);
      if (pos->score.has_value() == !pos->training_error.empty()) {
        throw RecordError("a score is present exactly when training succeeded");
      }
      break;
    }
    case EventType::iteration_closed: {
      auto& it = iteration_for(field<int>(d, "restart"), field<int>(d, "iteration"), false);
      const int expected = it.prompt ? it.prompt->k : 1;
      if (static_cast<int>(it.candidates.size()) != expected) throw RecordError("iteration closed with missing candidates");
      std::optional<int> best_sample;
      std::optional<double> best_score;
      for (const auto& c : it.candidates) {
        if (c.program && !c.scored) throw RecordError("iteration closed with unscored candidates");
        if (c.score && (!best_score || *c.score > *best_score)) {
          best_score = c.score;
          best_sample = c.index.sample;
        }
      }
      std::optional<double> restart_best = best_score;
      if (it.iteration > 0) {
        const auto& prev = iterations_[iterations_.size() - 2];
        if (prev.restart_best_score && (!restart_best || *prev.restart_best_score >= *restart_best)) {
          restart_best = prev.restart_best_score;
        }
      }
      std::optional<BestCandidate> overall = overall_best_;
      if (best_score && (!overall || *best_score > overall->score)) {
        overall = BestCandidate{{it.restart, it.iteration, *best_sample}, it.find(*best_sample)->program_text,
                                *best_score};
      }
      const auto recorded_sample = optional_field<int>(d, "best_sample");
      if (recorded_sample != best_sample || !same(optional_field<double>(d, "best_score"), best_score) ||
          !same(optional_field<double>(d, "restart_best_score"), restart_best) ||
          !same(optional_field<double>(d, "overall_best_score"),
                overall ? std::optional<double>(overall->score) : std::nullopt)) {
        throw RecordError("recorded best scores disagree with the candidates");
      }
      it.best_sample = best_sample;
      it.best_score = best_score;
      it.restart_best_score = restart_best;
      it.feedback = field<std::string>(d, "feedback");
      it.closed = true;
      overall_best_ = overall;
      if (config_.mode == SearchMode::human_feedback && it.iteration + 1 < config_.iterations) {
        next_status = RunStatus::paused_for_feedback;
      }
      break;
    }
    case EventType::feedback_attached: {
      if (status_ != RunStatus::paused_for_feedback) throw RecordError("feedback attached to a run that is not paused");
      auto& last = iterations_.back();
      if (field<int>(d, "restart") != last.restart || field<int>(d, "iteration") != last.iteration + 1) {
        throw RecordError("feedback must steer the iteration after the last closed one");
      }
      last.human_feedback = field<std::string>(d, "text");
      break;
    }
    case EventType::run_failed: {
      failure_ = field<std::string>(d, "error");
      next_status = RunStatus::failed;
      break;
    }
    case EventType::run_finished: {
      const int total = config_.restarts * config_.iterations;
      if (static_cast<int>(iterations_.size()) != total || !iterations_.back().closed) {
        throw RecordError("run_finished before every iteration closed");
      }
      if (auto fin = optional_field<json>(d, "final")) {
        FinalScore f;
        f.ref = {field<int>(*fin, "restart"), field<int>(*fin, "iteration"), field<int>(*fin, "sample")};
        f.score = field<double>(*fin, "score");
        f.run_scores = field<std::vector<double>>(*fin, "run_scores");
        f.run_checkpoint_fitness = field<std::vector<std::vector<double>>>(*fin, "run_checkpoint_fitness");
        if (!overall_best_ || !(overall_best_->ref == f.ref)) throw RecordError("final score is not for the best candidate");
        final_ = std::move(f);
      } else if (overall_best_) {
        throw RecordError("run_finished without a final score");
      }
      next_status = RunStatus::finished;
      break;
    }
  }
  status_ = next_status;
  events_.push_back(e);
}

}  // namespace rewardevo::evo
