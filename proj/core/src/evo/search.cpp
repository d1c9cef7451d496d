#include "rewardevo/evo/search.hpp"

#include <algorithm>

#include "rewardevo/gen/generator.hpp"
#include "rewardevo/reflect/reflection.hpp"
#include "rewardevo/util/random.hpp"
#include "rewardevo/util/worker_pool.hpp"

namespace rewardevo::evo {
namespace {

using nlohmann::json;

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
json optional_json(const std::optional<int>& v) { return v ? json(*v) : json(nullptr); }

json error_json(const std::optional<dsl::ParseError>& err) {
  if (!err) return nullptr;
  return {{"line", err->line()}, {"column", err->column()}, {"message", err->message()}};
}

struct Outcome {
  std::optional<Evaluation> evaluation;
  std::optional<opt::TrainingFailure> failure;
};

class Search {
 public:
  Search(RunRecord record, SearchServices services)
      : record_(std::move(record)),
        services_(services),
        cfg_(record_.config()),
        spec_(env::get_environment(record_.env_id()).spec()) {}

  RunRecord run() {
    if (record_.status() == RunStatus::finished) return std::move(record_);
    for (int r = 0; r < cfg_.restarts; ++r) {
      for (int n = 0; n < cfg_.iterations; ++n) {
        const auto* it = record_.find_iteration(r, n);
        if (it != nullptr && it->closed) continue;
        if (cfg_.mode == SearchMode::human_feedback && n > 0 && !record_.find_iteration(r, n - 1)->human_feedback) {
          return std::move(record_);  // paused
        }
        if (!propose(r, n)) return std::move(record_);
        score(r, n);
        close(r, n);
      }
    }
    finish();
    return std::move(record_);
  }

  void emit(EventType type, json data) {
    Event e{0, type, std::move(data)};
    services_.sink.append(e);
    record_.apply(e);
  }

 private:
  gen::GeneratorContext context(int r, int n) const {
    gen::GeneratorContext ctx;
    ctx.env_id = spec_.id;
    ctx.env_context = env::render_context(spec_);
    ctx.task_description = spec_.task_description;
    ctx.registry = spec_.registry;
    ctx.iteration = n;
    ctx.expose_components = cfg_.ablation != Ablation::no_reflection;
    ctx.sample_seed = generator_seed(cfg_, r, n);
    ctx.samples_consumed = record_.samples_consumed();
    if (n == 0) return ctx;

    const auto& prev = *record_.find_iteration(r, n - 1);
    const std::string feedback = prev.human_feedback ? *prev.human_feedback : prev.feedback;
    if (prev.best_sample) {
      const auto& best = *prev.find(*prev.best_sample);
      ctx.prior = gen::PriorCandidate{best.program_text, best.program, feedback};
    } else if (cfg_.ablation != Ablation::no_reflection) {
      // Every candidate failed: carry the lowest-index failure.
      const auto& failed = prev.candidates.front();
      ctx.prior = gen::PriorCandidate{failed.program_text, failed.program, feedback};
    }
    return ctx;
  }

  bool propose(int r, int n) {
    const auto* it = record_.find_iteration(r, n);
    if (cfg_.mode == SearchMode::human_init && n == 0) {
      if (it == nullptr || it->candidates.empty()) {
        const auto program = dsl::parse_program(cfg_.human_program, spec_.registry);
        emit(EventType::candidate_proposed, {{"restart", r},
                                             {"iteration", n},
                                             {"sample", 0},
                                             {"source", "human"},
                                             {"raw_text", cfg_.human_program},
                                             {"program_text", dsl::serialize_program(program)},
                                             {"error", nullptr},
                                             {"feedback", ""}});
      }
      return true;
    }

    const int k = cfg_.samples_per_iteration();
    if (it != nullptr && it->prompt && static_cast<int>(it->candidates.size()) == k) return true;

    auto ctx = context(r, n);
    if (it == nullptr || !it->prompt) {
      const auto bundle = gen::assemble_prompt(ctx);
      emit(EventType::proposals_requested, {{"restart", r},
                                            {"iteration", n},
                                            {"k", k},
                                            {"sample_seed", ctx.sample_seed},
                                            {"samples_consumed", ctx.samples_consumed},
                                            {"system", bundle.system},
                                            {"user", bundle.user}});
      it = record_.find_iteration(r, n);
    } else {
      ctx.sample_seed = it->prompt->sample_seed;
      ctx.samples_consumed = it->prompt->samples_consumed;
    }

    std::vector<gen::Proposal> proposals;
    try {
      proposals = services_.generator.propose(ctx, k, cfg_.temperature);
      if (static_cast<int>(proposals.size()) != k) {
        throw gen::GeneratorError("generator returned " + std::to_string(proposals.size()) + " proposals, expected " +
                                  std::to_string(k));
      }
    } catch (const gen::GeneratorError& err) {
      emit(EventType::run_failed, {{"error", err.what()}});
      return false;
    }

    for (int j = 0; j < k; ++j) {
      if (record_.find_iteration(r, n)->find(j) != nullptr) continue;
      auto& p = proposals[static_cast<std::size_t>(j)];
      emit(EventType::candidate_proposed,
           {{"restart", r},
            {"iteration", n},
            {"sample", j},
            {"source", "generator"},
            {"raw_text", p.raw_text},
            {"program_text", p.program_text},
            {"error", error_json(p.error)},
            {"feedback", p.error ? reflect::build_failure_feedback(*p.error) : std::string{}}});
    }
    return true;
  }

  void score(int r, int n) {
    const auto& it = *record_.find_iteration(r, n);
    std::vector<const Candidate*> pending;
    for (const auto& c : it.candidates) {
      if (c.program && !c.scored) pending.push_back(&c);
    }
    std::vector<Outcome> outcomes(pending.size());
    const auto seed = training_seed(cfg_, r, n);
    parallel_for(pending.size(), static_cast<std::size_t>(cfg_.workers), [&](std::size_t i) {
      try {
        outcomes[i].evaluation =
            services_.evaluator.evaluate(spec_, *pending[i]->program, cfg_.trainer, seed, cfg_.intermediate_runs);
      } catch (const opt::TrainingFailure& err) {
        outcomes[i].failure = err;
      }
    });

    for (std::size_t i = 0; i < pending.size(); ++i) {
      const Candidate& c = *pending[i];
      json data = {{"restart", r}, {"iteration", n}, {"sample", c.index.sample}};
      if (const auto& ev = outcomes[i].evaluation) {
        const auto& report = ev->reports.front();
        data["score"] = ev->score;
        data["run_scores"] = ev->run_scores;
        data["report"] = to_json(report);
        data["training_error"] = "";
        data["feedback"] = cfg_.ablation == Ablation::no_reflection
                               ? reflect::build_fitness_only_feedback(report)
                               : reflect::build_reflection(report, *c.program).text;
      } else {
        data["score"] = nullptr;
        data["run_scores"] = json::array();
        data["report"] = nullptr;
        data["training_error"] = outcomes[i].failure->what();
        data["feedback"] = reflect::build_failure_feedback(*outcomes[i].failure);
      }
      emit(EventType::candidate_scored, std::move(data));
    }
  }

  void close(int r, int n) {
    const auto& it = *record_.find_iteration(r, n);
    const Candidate* best = nullptr;
    for (const auto& c : it.candidates) {
      if (c.score && (best == nullptr || *c.score > *best->score)) best = &c;
    }
    std::optional<double> best_score = best ? best->score : std::nullopt;
    std::optional<double> restart_best = best_score;
    if (n > 0) {
      const auto& prev = *record_.find_iteration(r, n - 1);
      if (prev.restart_best_score && (!restart_best || *prev.restart_best_score >= *restart_best)) {
        restart_best = prev.restart_best_score;
      }
    }
    std::optional<double> overall = record_.overall_best() ? std::optional(record_.overall_best()->score) : std::nullopt;
    if (best_score && (!overall || *best_score > *overall)) overall = best_score;

    emit(EventType::iteration_closed,
         {{"restart", r},
          {"iteration", n},
          {"best_sample", optional_json(best ? std::optional(best->index.sample) : std::nullopt)},
          {"best_score", optional_json(best_score)},
          {"restart_best_score", optional_json(restart_best)},
          {"overall_best_score", optional_json(overall)},
          {"feedback", best ? best->feedback : it.candidates.front().feedback}});
  }

  void finish() {
    json final_score = nullptr;
    if (const auto& best = record_.overall_best()) {
      const auto program = dsl::parse_program(best->program_text, spec_.registry);
      std::vector<std::vector<double>> series;
      Evaluation ev;
      try {
        ev = services_.evaluator.evaluate(spec_, program, cfg_.trainer, final_seed(cfg_), cfg_.final_runs);
      } catch (const opt::TrainingFailure& err) {
        emit(EventType::run_failed, {{"error", std::string("final scoring failed: ") + err.what()}});
        return;
      }
      for (const auto& report : ev.reports) {
        std::vector<double> fitness;
        for (const auto& s : report.checkpoint_snapshots) fitness.push_back(s.fitness);
        series.push_back(std::move(fitness));
      }
      final_score = {{"restart", best->ref.restart},
                     {"iteration", best->ref.iteration},
                     {"sample", best->ref.sample},
                     {"score", ev.score},
                     {"run_scores", ev.run_scores},
                     {"run_checkpoint_fitness", series}};
    }
    emit(EventType::run_finished, {{"final", final_score}});
  }

  RunRecord record_;
  SearchServices services_;
  EvolutionConfig cfg_;
  const env::EnvironmentSpec& spec_;
};

bool registries_compatible(const dsl::VarRegistry& a, const dsl::VarRegistry& b) {
  const auto ea = a.entries();
  const auto eb = b.entries();
  if (ea.size() != eb.size()) return false;
  for (std::size_t i = 0; i < ea.size(); ++i) {
    if (ea[i].name != eb[i].name || ea[i].kind != eb[i].kind || ea[i].dimension != eb[i].dimension) return false;
  }
  return true;
}

}  // namespace

Evaluation TrainingEvaluator::evaluate(const env::EnvironmentSpec& spec, const dsl::RewardProgram& program,
                                       const opt::TrainerConfig& trainer, std::uint64_t seed, int runs) {
  if (runs < 1) throw std::invalid_argument("runs must be at least 1");
  Evaluation out;
  double sum = 0.0;
  for (int i = 0; i < runs; ++i) {
    opt::TrainerConfig cfg = trainer;
    cfg.seed = seed + static_cast<std::uint64_t>(i);
    auto [policy, report] = opt::train_policy(spec, program, cfg);
    report.transitions_sample.clear();
    sum += report.final_fitness;
    out.run_scores.push_back(report.final_fitness);
    out.reports.push_back(std::move(report));
    if (i == 0) out.policy = std::move(policy);
  }
  out.score = sum / runs;
  return out;
}

Evaluation ScoreTableEvaluator::evaluate(const env::EnvironmentSpec& spec, const dsl::RewardProgram& program,
                                         const opt::TrainerConfig& trainer, std::uint64_t /*seed*/, int runs) {
  auto it = scores_.find(dsl::serialize_program(program));
  if (it == scores_.end()) throw opt::TrainingFailure(0, "no recorded score for this program");
  opt::TrainingReport report;
  const auto names = program.component_names();
  for (int g : opt::checkpoint_generations(trainer)) {
    opt::Snapshot snap;
    snap.generation = g;
    snap.fitness = it->second;
    for (const auto& name : names) snap.component_means.emplace_back(name, 0.0);
    report.checkpoint_snapshots.push_back(std::move(snap));
  }
  report.final_fitness = it->second;
  report.initial_fitness = it->second;
  Evaluation out;
  out.score = it->second;
  out.run_scores.assign(static_cast<std::size_t>(runs), it->second);
  out.reports.assign(static_cast<std::size_t>(runs), report);
  out.policy = opt::Policy::zeros(spec.observation_dim, spec.action_dim);
  return out;
}

std::map<std::string, double> score_table(const std::vector<std::pair<std::string, std::optional<double>>>& entries,
                                          const dsl::VarRegistry& registry) {
  std::map<std::string, double> table;
  for (const auto& [response, score] : entries) {
    if (!score) continue;
    auto p = gen::make_proposal(response, registry);
    if (p.program) table[p.program_text] = *score;
  }
  return table;
}

std::uint64_t generator_seed(const EvolutionConfig& cfg, int restart, int iteration) {
  return derive_seed(cfg.seed, {hash_label("generator"), static_cast<std::uint64_t>(restart),
                                static_cast<std::uint64_t>(iteration)});
}

std::uint64_t training_seed(const EvolutionConfig& cfg, int restart, int iteration) {
  return derive_seed(cfg.seed, {hash_label("train"), static_cast<std::uint64_t>(restart),
                                static_cast<std::uint64_t>(iteration)});
}

std::uint64_t final_seed(const EvolutionConfig& cfg) { return derive_seed(cfg.seed, {hash_label("final")}); }

RunRecord run_search(const std::string& run_id, const std::string& env_id, const EvolutionConfig& cfg,
                     SearchServices services) {
  cfg.validate();
  const auto& spec = env::get_environment(env_id).spec();
  if (cfg.mode == SearchMode::human_init) dsl::parse_program(cfg.human_program, spec.registry);
  Event e{0, EventType::run_started, {{"run_id", run_id}, {"env", env_id}, {"config", to_json(cfg)}}};
  services.sink.append(e);
  RunRecord record;
  record.apply(e);
  return resume_search(std::move(record), services);
}

RunRecord resume_search(RunRecord record, SearchServices services) {
  if (record.events().empty()) throw std::invalid_argument("cannot resume an empty record");
  return Search(std::move(record), services).run();
}

RunRecord attach_human_feedback(RunRecord record, const std::string& text, EventSink& sink) {
  if (record.status() != RunStatus::paused_for_feedback) {
    throw FeedbackRejected("run " + record.run_id() + " is " + std::string(to_string(record.status())) +
                           ", not paused for feedback");
  }
  const auto& last = record.iterations().back();
  Event e{0, EventType::feedback_attached,
          {{"restart", last.restart}, {"iteration", last.iteration + 1}, {"text", text}}};
  sink.append(e);
  record.apply(e);
  return record;
}

RunRecord run_human_feedback_step(RunRecord record, const std::string& text, SearchServices services) {
  return resume_search(attach_human_feedback(std::move(record), text, services.sink), services);
}

CurriculumOutcome run_curriculum(const CurriculumStage& stage_a, const CurriculumStage& stage_b,
                                 SearchServices services) {
  const auto& env_a = env::get_environment(stage_a.env_id);
  const auto& env_b = env::get_environment(stage_b.env_id);
  if (!registries_compatible(env_a.spec().registry, env_b.spec().registry)) {
    throw std::invalid_argument("curriculum stages expose different variables: " + stage_a.env_id + " and " +
                                stage_b.env_id);
  }
  const auto& cfg_b = stage_b.cfg;
  if (cfg_b.final_runs < 1) throw std::invalid_argument("stage B needs at least one run");
  if (cfg_b.trainer.generations != 0) cfg_b.trainer.validate();

  CurriculumOutcome out;
  out.stage_a = run_search("curriculum-" + stage_a.env_id, stage_a.env_id, stage_a.cfg, services);
  if (out.stage_a.status() != RunStatus::finished || !out.stage_a.overall_best()) {
    throw std::runtime_error("stage A did not produce a scored reward program");
  }
  out.program_text = out.stage_a.overall_best()->program_text;
  const auto program_a = dsl::parse_program(out.program_text, env_a.spec().registry);
  const auto program_b = dsl::parse_program(out.program_text, env_b.spec().registry);

  opt::TrainerConfig pre_cfg = stage_a.cfg.trainer;
  pre_cfg.seed = final_seed(stage_a.cfg);
  out.pretrained = opt::train_policy(env_a, program_a, pre_cfg).first;

  const auto base_seed = final_seed(cfg_b);
  double direct = 0.0;
  double tuned = 0.0;
  double scratch = 0.0;
  const auto zero = opt::Policy::zeros(env_b.spec().observation_dim, env_b.spec().action_dim);
  for (int i = 0; i < cfg_b.final_runs; ++i) {
    opt::TrainerConfig cfg = cfg_b.trainer;
    cfg.seed = base_seed + static_cast<std::uint64_t>(i);
    const auto eval_seed = derive_seed(cfg.seed, {hash_label("eval")});
    const double d = opt::evaluate_policy(env_b, program_b, out.pretrained, eval_seed, cfg.eval_episodes).fitness;
    double t = d;
    double s = opt::evaluate_policy(env_b, program_b, zero, eval_seed, cfg.eval_episodes).fitness;
    if (cfg.generations > 0) {
      t = opt::train_policy(env_b, program_b, cfg, &out.pretrained).second.final_fitness;
      s = opt::train_policy(env_b, program_b, cfg).second.final_fitness;
    }
    direct += d;
    tuned += t;
    scratch += s;
    out.fine_tuned.run_scores.push_back(t);
    out.scratch.run_scores.push_back(s);
  }
  out.pretrained_direct = direct / cfg_b.final_runs;
  out.fine_tuned.fitness = tuned / cfg_b.final_runs;
  out.scratch.fitness = scratch / cfg_b.final_runs;
  return out;
}

}  // namespace rewardevo::evo
