// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails. Pass criterion names as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <random>
#include <regex>
#include <set>

#include <fmt/format.h>

#include "rewardevo/dsl/program.hpp"
#include "rewardevo/evo/search.hpp"
#include "rewardevo/gen/l2r.hpp"
#include "rewardevo/gen/mock.hpp"
#include "rewardevo/gen/replay.hpp"
#include "rewardevo/metrics/metrics.hpp"
#include "rewardevo/store/views.hpp"
#include "support/program_fuzz.hpp"
#include "support/search_fixtures.hpp"
#include "support/store_fixtures.hpp"

using namespace rewardevo;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances and budgets.
constexpr double kTraceBudgetS = 5.0;
constexpr double kEvolutionBudgetS = 600.0;
constexpr double kHumanInitBudgetS = 600.0;
constexpr double kCurriculumBudgetS = 900.0;
constexpr double kFinalSuccessMin = 0.9;
constexpr int kMinIncreasingBoundaries = 2;
constexpr double kExactTol = 1e-12;
constexpr double kL2RTol = 1e-12;
constexpr int kDatasets = 1000;
constexpr int kL2RInputs = 1000;
constexpr int kCrashTrials = 20;
constexpr int kDslCases = 10000;
const std::vector<std::uint64_t> kSeedSet{0, 1, 2};

struct Verdict {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Trainer used by the search criteria: wider elite and exploration than the
// library defaults, no wall-clock budget so results are reproducible.
opt::TrainerConfig search_trainer() {
  opt::TrainerConfig t;
  t.elite_fraction = 0.25;
  t.initial_std = 1.0;
  t.noise_floor = 0.2;
  t.generations = 60;
  t.rollouts_per_candidate = 4;
  t.eval_episodes = 40;
  t.time_budget_s = 0;
  return t;
}

double fixture_score(const env::EnvironmentSpec& spec, const std::string& source, const evo::EvolutionConfig& cfg) {
  opt::TrainerConfig t = cfg.trainer;
  t.seed = evo::final_seed(cfg);
  return opt::evaluate_policy_final(spec, dsl::parse_program(source, spec.registry), t, cfg.final_runs);
}

evo::RunRecord mock_search(const std::string& env_id, const evo::EvolutionConfig& cfg) {
  gen::MockGenerator mock;
  evo::TrainingEvaluator evaluator;
  evo::MemorySink sink;
  return evo::run_search("acceptance", env_id, cfg, {mock, evaluator, sink});
}

Verdict search_trace() {
  const auto t0 = Clock::now();
  auto trace = test_support::replay_trace();
  gen::ReplayGenerator replay(trace.fixture);
  evo::ScoreTableEvaluator evaluator(trace.scores);
  evo::MemorySink sink;
  const auto record = evo::run_search("trace", trace.env_id, trace.cfg, {replay, evaluator, sink});
  const double elapsed = seconds_since(t0);

  const auto best = record.best_per_iteration();
  const bool best_ok = best == std::vector<std::optional<double>>{0.3, 0.4};
  const bool overall_ok = record.overall_best() && record.overall_best()->score == 0.4;
  const auto curve = store::best_so_far_mean(record);
  bool monotone = true;
  for (std::size_t i = 1; i < curve.size(); ++i) monotone = monotone && curve[i] && curve[i - 1] && *curve[i] >= *curve[i - 1];
  return {best_ok && overall_ok && monotone && elapsed < kTraceBudgetS,
          fmt::format("best_per_iteration [{}, {}], best {}, monotone {}, {:.2f}s", best.size() > 0 && best[0] ? *best[0] : NAN,
                      best.size() > 1 && best[1] ? *best[1] : NAN,
                      record.overall_best() ? record.overall_best()->score : NAN, monotone, elapsed)};
}

Verdict evolution_improves() {
  const auto t0 = Clock::now();
  const auto& spec = env::get_environment("reach_success").spec();
  std::vector<double> curve_sum(5, 0.0);
  double final_sum = 0.0;
  double sparse_sum = 0.0;
  std::string per_seed;
  for (const auto seed : kSeedSet) {
    evo::EvolutionConfig cfg;
    cfg.iterations = 5;
    cfg.samples = 16;
    cfg.restarts = 3;
    cfg.seed = seed;
    cfg.trainer = search_trainer();
    const auto record = mock_search("reach_success", cfg);
    if (record.status() != evo::RunStatus::finished || !record.final_score()) {
      return {false, fmt::format("seed {} did not finish: {}", seed, record.failure())};
    }
    const auto curve = store::best_so_far_mean(record);
    for (std::size_t i = 0; i < curve.size(); ++i) curve_sum[i] += curve[i].value_or(0.0);
    const double fin = record.final_score()->score;
    const double sparse = fixture_score(spec, spec.sparse_reward, cfg);
    final_sum += fin;
    sparse_sum += sparse;
    per_seed += fmt::format(" s{}:{:.3f}/{:.3f}", seed, fin, sparse);
  }
  const double n = static_cast<double>(kSeedSet.size());
  std::string curve_text;
  int increases = 0;
  for (std::size_t i = 0; i < curve_sum.size(); ++i) {
    curve_sum[i] /= n;
    curve_text += fmt::format("{}{:.4f}", i ? " " : "", curve_sum[i]);
    if (i > 0 && curve_sum[i] > curve_sum[i - 1]) ++increases;
  }
  const double fin = final_sum / n;
  const double sparse = sparse_sum / n;
  const double elapsed = seconds_since(t0);
  const bool pass = increases >= kMinIncreasingBoundaries && fin >= sparse && fin >= kFinalSuccessMin &&
                    elapsed < kEvolutionBudgetS;
  return {pass, fmt::format("best-so-far [{}] ({} increases), final {:.4f} vs sparse {:.4f}, seeds final/sparse{}, {:.0f}s",
                            curve_text, increases, fin, sparse, per_seed, elapsed)};
}

Verdict human_init_dominance() {
  const auto t0 = Clock::now();
  const auto& spec = env::get_environment("pointmass_reach").spec();
  bool pass = true;
  std::string per_seed;
  for (const auto seed : kSeedSet) {
    evo::EvolutionConfig cfg;
    cfg.iterations = 5;
    cfg.samples = 16;
    cfg.restarts = 1;
    cfg.seed = seed;
    cfg.trainer = search_trainer();
    cfg = evo::apply_human_init(cfg, spec.human_reward, spec.registry);
    const auto record = mock_search("pointmass_reach", cfg);
    const double human = fixture_score(spec, spec.human_reward, cfg);
    if (!record.overall_best() || !record.final_score()) return {false, fmt::format("seed {} has no best", seed)};
    const double best = record.overall_best()->score;
    pass = pass && best >= human;
    // The rescored final of the selected program is shown for reference.
    per_seed += fmt::format(" s{}: best {:.5f} human {:.5f} (final {:.5f})", seed, best, human,
                            record.final_score()->score);
  }
  const double elapsed = seconds_since(t0);
  return {pass && elapsed < kHumanInitBudgetS, fmt::format("{}; {:.0f}s", per_seed.substr(1), elapsed)};
}

Verdict curriculum_transfer() {
  const auto t0 = Clock::now();
  double fine_sum = 0.0;
  double scratch_sum = 0.0;
  std::string per_seed;
  for (const auto seed : kSeedSet) {
    evo::CurriculumStage a{"reach_success", {}};
    a.cfg.iterations = 5;
    a.cfg.samples = 16;
    a.cfg.restarts = 1;
    a.cfg.seed = seed;
    a.cfg.trainer = search_trainer();
    evo::CurriculumStage b{"waypoint_relay", {}};
    b.cfg.seed = seed;
    b.cfg.trainer = search_trainer();
    gen::MockGenerator mock;
    evo::TrainingEvaluator evaluator;
    evo::MemorySink sink;
    const auto out = evo::run_curriculum(a, b, {mock, evaluator, sink});
    fine_sum += out.fine_tuned.fitness;
    scratch_sum += out.scratch.fitness;
    per_seed += fmt::format(" s{}:{:.2f}/{:.2f}", seed, out.fine_tuned.fitness, out.scratch.fitness);
  }
  const double n = static_cast<double>(kSeedSet.size());
  const double elapsed = seconds_since(t0);
  return {fine_sum / n >= scratch_sum / n && elapsed < kCurriculumBudgetS,
          fmt::format("fine-tuned {:.3f} vs scratch {:.3f}, seeds fine/scratch{}, {:.0f}s", fine_sum / n,
                      scratch_sum / n, per_seed, elapsed)};
}

Verdict metrics_exactness() {
  using namespace metrics;
  std::vector<std::string> failed;
  auto check = [&](bool ok, const char* what) {
    if (!ok) failed.emplace_back(what);
  };
  check(human_normalized_score({3.7, -1.2, 3.7}) == 1.0, "normalized(human)");
  check(human_normalized_score({-1.2, -1.2, 3.7}) == 0.0, "normalized(sparse)");
  check(clip_for_aggregate(11.98) == 3.0, "clip(11.98)");
  check(iqm(std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8}) == 4.5, "iqm(1..8)");

  std::mt19937_64 rng(2024);
  std::normal_distribution<double> normal;
  std::vector<double> x(50);
  for (double& v : x) v = normal(rng);
  std::vector<double> neg(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) neg[i] = -x[i];
  check(std::fabs(pearson_correlation(x, x) - 1.0) <= kExactTol, "pearson(x, x)");
  check(std::fabs(pearson_correlation(x, neg) + 1.0) <= kExactTol, "pearson(x, -x)");

  std::uniform_int_distribution<int> len(1, 12);
  std::uniform_int_distribution<int> level(0, 4);  // coarse values force ties
  int law_failures = 0;
  for (int d = 0; d < kDatasets; ++d) {
    std::vector<double> a(static_cast<std::size_t>(len(rng)));
    std::vector<double> b(static_cast<std::size_t>(len(rng)));
    for (double& v : a) v = level(rng);
    for (double& v : b) v = level(rng);
    if (std::fabs(prob_improvement(a, b) + prob_improvement(b, a) - 1.0) > kExactTol) ++law_failures;
  }
  check(law_failures == 0, "prob_improvement tie law");
  std::string detail = "anchors, clip, iqm, pearson at 1e-12, tie law on 1000 datasets";
  if (!failed.empty()) {
    detail = "failed:";
    for (const auto& f : failed) detail += " " + f;
  }
  return {failed.empty(), detail};
}

// Formulas of the reward primitives, written out independently of the library.
double operand_value(const gen::Operand& op, const dsl::Binding& b, std::size_t element) {
  if (op.variable.empty()) return op.constant;
  const auto& v = b.at(op.variable);
  return op.index >= 0 ? v[static_cast<std::size_t>(op.index)] : v[element];
}

double reference_primitive(const gen::L2RPrimitive& p, const dsl::Binding& b) {
  const std::size_t n = p.dimension == 0 ? 1 : static_cast<std::size_t>(p.dimension);
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = operand_value(p.a, b, i) - operand_value(p.b, b, i);
    sq += d * d;
  }
  const double norm = std::sqrt(sq);
  const double diff = operand_value(p.a, b, 0) - operand_value(p.b, b, 0);
  double v = 0.0;
  switch (p.kind) {
    case gen::PrimitiveKind::min_dist: v = -norm; break;
    case gen::PrimitiveKind::max_dist: v = norm; break;
    case gen::PrimitiveKind::inv_dist: v = 1.0 / (1.0 + norm); break;
    case gen::PrimitiveKind::exp_sq_diff: v = std::exp(-diff * diff); break;
    case gen::PrimitiveKind::abs_diff: v = -std::fabs(diff); break;
    case gen::PrimitiveKind::duration_style: v = -diff * diff; break;
  }
  return p.scale * v;
}

Verdict l2r_primitives() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  double worst_primitive = 0.0;
  double worst_total = 0.0;
  std::set<gen::PrimitiveKind> kinds;
  for (const auto& id : env::environment_ids()) {
    const auto& spec = env::get_environment(id).spec();
    std::vector<gen::L2RPrimitive> prims;
    for (const auto& s : gen::l2r_template(id)) prims.push_back(gen::parse_statement(s, spec.registry));
    for (const auto& p : prims) kinds.insert(p.kind);
    const auto program = gen::l2r_program(prims, spec.registry);
    for (int trial = 0; trial < kL2RInputs; ++trial) {
      dsl::Binding b;
      for (const auto& var : spec.registry.entries()) {
        std::vector<double> v(static_cast<std::size_t>(var.dimension));
        for (double& x : v) x = u(rng);
        b[var.name] = v;
      }
      const auto out = dsl::evaluate_program(program, b);
      double sum = 0.0;
      for (std::size_t i = 0; i < prims.size(); ++i) {
        const double want = reference_primitive(prims[i], b);
        worst_primitive = std::max({worst_primitive, std::fabs(gen::primitive_value(prims[i], b) - want),
                                    std::fabs(out.components[i].second - want)});
        sum += want;
      }
      worst_total = std::max(worst_total, std::fabs(out.total - sum));
    }
  }
  const bool pass = worst_primitive <= kL2RTol && worst_total <= kL2RTol && kinds.size() == 6;
  return {pass, fmt::format("{} primitive kinds over {} envs x {} inputs, max error {:.2e}, total vs sum {:.2e}",
                            kinds.size(), env::environment_ids().size(), kL2RInputs, worst_primitive, worst_total)};
}

bool mentions(const std::string& text, const std::string& name) {
  return std::regex_search(text, std::regex("(^|[^A-Za-z0-9_])" + name + "([^A-Za-z0-9_]|$)"));
}

Verdict ablation_contract() {
  test_support::TempDir dir;
  auto run = [&](const std::string& id, evo::Ablation ablation) {
    auto cfg = test_support::tiny_run(dir.path(), id, 5);
    cfg.env = "reach_success";
    cfg.evolution.ablation = ablation;
    cfg.evolution.iterations = ablation == evo::Ablation::no_evolution ? 1 : 4;
    cfg.evolution.samples = 8;
    cfg.evolution.restarts = 1;
    store::start_run(cfg);
    return store::load_run(dir.path() / id).record;  // prompts as recorded on disk
  };

  const auto hidden = run("no_reflection", evo::Ablation::no_reflection);
  std::set<std::string> names;
  for (const auto& it : hidden.iterations()) {
    for (const auto& c : it.candidates) {
      if (c.program) {
        for (const auto& n : c.program->component_names()) names.insert(n);
      }
    }
  }
  const std::string& base = hidden.iterations().front().prompt->user;
  int leaks = 0;
  int checked_names = 0;
  int prompts = 0;
  for (const auto& name : names) {
    if (mentions(base, name)) continue;  // vocabulary of the environment description
    ++checked_names;
    for (const auto& it : hidden.iterations()) {
      if (it.prompt && mentions(it.prompt->user, name)) ++leaks;
    }
  }
  for (const auto& it : hidden.iterations()) prompts += it.prompt ? 1 : 0;

  const auto single = run("no_evolution", evo::Ablation::no_evolution);
  int requests = 0;
  int k = 0;
  for (const auto& e : single.events()) {
    if (e.type == evo::EventType::proposals_requested) {
      ++requests;
      k = e.data["k"].get<int>();
    }
  }
  const auto candidates = single.iterations().size() == 1 ? single.iterations()[0].candidates.size() : 0;

  const auto full = run("automatic", evo::Ablation::none);
  int shown = 0;
  int post_zero = 0;
  for (const auto& it : full.iterations()) {
    if (it.iteration == 0) continue;
    ++post_zero;
    const auto& prev = *full.find_iteration(it.restart, it.iteration - 1);
    const auto& prior = prev.best_sample ? *prev.find(*prev.best_sample) : prev.candidates.front();
    bool all = prior.program.has_value();
    if (all) {
      for (const auto& n : prior.program->component_names()) all = all && mentions(it.prompt->user, n);
    }
    shown += all ? 1 : 0;
  }
  const bool pass = leaks == 0 && checked_names > 0 && requests == 1 && k == 32 && candidates == 32 &&
                    shown == post_zero && post_zero > 0;
  return {pass, fmt::format("no_reflection: {} names x {} prompts, {} leaks; no_evolution: {} request(s) of k={}, {} "
                            "candidates; automatic: prior shown in {}/{} prompts",
                            checked_names, prompts, leaks, requests, k, candidates, shown, post_zero)};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Verdict determinism_crash_safety() {
  test_support::TempDir dir;
  // Same run_id everywhere, one store root per run.
  const auto make = [&](const std::string& root) { return test_support::tiny_run(dir.path() / root, "run", 9); };
  const auto record_of = [&](const std::string& root) { return slurp(dir.path() / root / "run" / "record.jsonl"); };
  const auto reference = store::start_run(make("reference"));
  const std::string ref_bytes = record_of("reference");
  store::start_run(make("repeat"));
  const bool repeat_ok = record_of("repeat") == ref_bytes;

  const int total = static_cast<int>(reference.events().size());
  std::mt19937 rng(31);
  std::uniform_int_distribution<int> point(1, total - 1);
  int identical = 0;
  int killed = 0;
  int torn = 0;
  for (int trial = 0; trial < kCrashTrials; ++trial) {
    const std::string root = "crash" + std::to_string(trial);
    const int kill_after = point(rng);
    if (!test_support::run_and_kill(make(root), kill_after)) continue;
    ++killed;
    if (trial % 4 == 0) {
      test_support::tear_record(dir.path() / root / "run");
      ++torn;
    }
    const auto resumed = store::resume_run(dir.path() / root / "run");
    if (resumed == reference && record_of(root) == ref_bytes) ++identical;
  }
  const bool pass = repeat_ok && killed == kCrashTrials && identical == kCrashTrials;
  return {pass, fmt::format("repeat identical {}, {}/{} killed runs resumed byte-identical ({} with a torn tail), {} events",
                            repeat_ok, identical, killed, torn, total)};
}

Verdict dsl_properties() {
  const auto reg = test_support::fuzz_registry();
  test_support::ProgramFuzzer fuzz(4242);
  int round_trip = 0;
  int impure = 0;
  int sum_mismatch = 0;
  int non_finite = 0;
  for (int i = 0; i < kDslCases; ++i) {
    const auto p = fuzz.program(reg);
    const auto text = dsl::serialize_program(p);
    if (!(dsl::parse_program(text, reg) == p)) ++round_trip;
    const auto binding = fuzz.binding(reg);
    const auto a = dsl::evaluate_program(p, binding);
    const auto b = dsl::evaluate_program(p, binding);
    if (std::memcmp(&a.total, &b.total, sizeof a.total) != 0) ++impure;
    double sum = 0.0;
    for (const auto& [name, value] : a.components) {
      if (!std::isfinite(value)) ++non_finite;
      sum += value;
    }
    if (!std::isfinite(a.total)) ++non_finite;
    if (std::fabs(a.total - sum) > 1e-9 * std::max(1.0, std::fabs(sum))) ++sum_mismatch;
  }
  return {round_trip + impure + sum_mismatch + non_finite == 0,
          fmt::format("{} programs: round-trip failures {}, impure {}, sum mismatches {}, non-finite {}", kDslCases,
                      round_trip, impure, sum_mismatch, non_finite)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"search_trace", search_trace},
      {"evolution_improves", evolution_improves},
      {"human_init_dominance", human_init_dominance},
      {"curriculum_transfer", curriculum_transfer},
      {"metrics_exactness", metrics_exactness},
      {"l2r_primitives", l2r_primitives},
      {"ablation_contract", ablation_contract},
      {"determinism_crash_safety", determinism_crash_safety},
      {"dsl_properties", dsl_properties},
  };
  std::set<std::string> only(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += v.pass ? 0 : 1;
    std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << v.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
