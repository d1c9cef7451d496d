#include <benchmark/benchmark.h>

#include <array>
#include <vector>

#include "rewardevo/dsl/program.hpp"
#include "rewardevo/env/environment.hpp"
#include "rewardevo/metrics/metrics.hpp"
#include "rewardevo/opt/trainer.hpp"

using namespace rewardevo;

namespace {

const std::vector<std::string>& env_ids() {
  static const auto ids = env::environment_ids();
  return ids;
}

void BM_ParseHumanReward(benchmark::State& state) {
  const auto& spec = env::get_environment(env_ids()[state.range(0)]).spec();
  for (auto _ : state) benchmark::DoNotOptimize(dsl::parse_program(spec.human_reward, spec.registry));
  state.SetLabel(spec.id);
}

void BM_EvaluateHumanReward(benchmark::State& state) {
  const auto& environment = env::get_environment(env_ids()[state.range(0)]);
  const auto& spec = environment.spec();
  const auto program = dsl::parse_program(spec.human_reward, spec.registry);
  std::vector<double> flat(static_cast<std::size_t>(spec.registry.flat_size()));
  environment.bind(environment.reset(7), flat);
  std::vector<double> scratch(program.scratch_size());
  std::vector<double> components(program.size());
  for (auto _ : state) {
    benchmark::DoNotOptimize(program.evaluate_flat(flat, scratch, components));
  }
  state.SetItemsProcessed(state.iterations());
  state.SetLabel(spec.id);
}

void BM_EnvironmentEpisode(benchmark::State& state) {
  const auto& environment = env::get_environment(env_ids()[state.range(0)]);
  const auto& spec = environment.spec();
  std::array<double, env::kMaxActionDim> action{};
  std::uint64_t seed = 0;
  for (auto _ : state) {
    auto s = environment.reset(seed++);
    for (int t = 0; t < spec.episode_length; ++t) {
      for (int a = 0; a < spec.action_dim; ++a) action[static_cast<std::size_t>(a)] = (t % 3) - 1.0;
      const auto ev = environment.advance(s, std::span<const double>(action.data(), spec.action_dim));
      benchmark::DoNotOptimize(ev);
      if (ev.terminated) break;
    }
  }
  state.SetLabel(spec.id);
}

void BM_TrainPolicySmall(benchmark::State& state) {
  const auto& spec = env::get_environment("pointmass_reach").spec();
  const auto program = dsl::parse_program(spec.human_reward, spec.registry);
  opt::TrainerConfig cfg;
  cfg.population = 32;
  cfg.generations = static_cast<int>(state.range(0));
  cfg.checkpoints = 2;
  cfg.eval_episodes = 4;
  cfg.time_budget_s = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(opt::train_policy(spec, program, cfg));
    ++cfg.seed;
  }
}

void BM_BootstrapCi(benchmark::State& state) {
  std::vector<double> scores;
  for (int i = 0; i < state.range(0); ++i) scores.push_back(0.1 * (i % 7) + 0.01 * i);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::bootstrap_ci(scores, metrics::mean));
}

void env_args(benchmark::internal::Benchmark* b) {
  for (std::size_t i = 0; i < env_ids().size(); ++i) b->Arg(static_cast<int>(i));
}

}  // namespace

BENCHMARK(BM_ParseHumanReward)->Apply(env_args);
BENCHMARK(BM_EvaluateHumanReward)->Apply(env_args);
BENCHMARK(BM_EnvironmentEpisode)->Apply(env_args);
BENCHMARK(BM_TrainPolicySmall)->Arg(5)->Arg(20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BootstrapCi)->Arg(5)->Arg(50)->Unit(benchmark::kMicrosecond);
BENCHMARK_MAIN();
