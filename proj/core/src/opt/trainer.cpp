#include "rewardevo/opt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "rewardevo/opt/cem.hpp"
#include "rewardevo/util/random.hpp"
#include "rewardevo/util/worker_pool.hpp"

namespace rewardevo::opt {

Policy Policy::zeros(int observation_dim, int action_dim) {
  Policy p;
  p.observation_dim = observation_dim;
  p.action_dim = action_dim;
  p.weights.assign(static_cast<std::size_t>(observation_dim * action_dim), 0.0);
  p.bias.assign(static_cast<std::size_t>(action_dim), 0.0);
  return p;
}

Policy Policy::from_parameters(int observation_dim, int action_dim, std::span<const double> params) {
  Policy p = zeros(observation_dim, action_dim);
  if (params.size() != p.weights.size() + p.bias.size()) {
    throw std::invalid_argument("policy parameter vector has the wrong size");
  }
  std::copy_n(params.begin(), p.weights.size(), p.weights.begin());
  std::copy(params.begin() + static_cast<std::ptrdiff_t>(p.weights.size()), params.end(), p.bias.begin());
  return p;
}

std::vector<double> Policy::parameters() const {
  std::vector<double> out(weights);
  out.insert(out.end(), bias.begin(), bias.end());
  return out;
}

void Policy::act(std::span<const double> observation, std::span<double> action) const {
  for (int a = 0; a < action_dim; ++a) {
    double z = bias[static_cast<std::size_t>(a)];
    const double* row = weights.data() + static_cast<std::ptrdiff_t>(a) * observation_dim;
    for (int o = 0; o < observation_dim; ++o) z += row[o] * observation[static_cast<std::size_t>(o)];
    action[static_cast<std::size_t>(a)] = std::tanh(z);
  }
}

void TrainerConfig::validate() const {
  auto fail = [](const char* what) { throw std::invalid_argument(std::string("trainer config: ") + what); };
  if (population < 2) fail("population must be at least 2");
  if (!(elite_fraction > 0.0 && elite_fraction <= 0.5)) fail("elite_fraction must be in (0, 0.5]");
  if (generations < 1) fail("generations must be at least 1");
  if (rollouts_per_candidate < 1) fail("rollouts_per_candidate must be at least 1");
  if (checkpoints < 1 || checkpoints > generations) fail("checkpoints must be in [1, generations]");
  if (!(noise_floor >= 0.0)) fail("noise_floor must be non-negative");
  if (!(initial_std > 0.0)) fail("initial_std must be positive");
  if (eval_episodes < 1) fail("eval_episodes must be at least 1");
  if (transition_sample_cap < 0) fail("transition_sample_cap must be non-negative");
  if (workers < 1) fail("workers must be at least 1");
}

std::vector<int> checkpoint_generations(const TrainerConfig& cfg) {
  std::vector<int> out;
  for (int k = 1; k <= cfg.checkpoints; ++k) {
    out.push_back(static_cast<int>(std::lround(static_cast<double>(k) * cfg.generations / cfg.checkpoints)));
  }
  return out;
}

namespace {

class Reservoir {
 public:
  Reservoir(std::size_t cap, std::uint64_t seed) : cap_(cap), rng_(make_rng(seed)) {}

  template <class Make>
  void offer(Make&& make) {
    ++seen_;
    if (items_.size() < cap_) {
      items_.push_back(make());
      return;
    }
    if (cap_ == 0) return;
    std::uniform_int_distribution<std::uint64_t> pick(0, seen_ - 1);
    const auto j = pick(rng_);
    if (j < cap_) items_[j] = make();
  }

  bool active() const noexcept { return cap_ > 0; }
  std::vector<env::Transition> take() { return std::move(items_); }

 private:
  std::size_t cap_;
  std::uint64_t seen_ = 0;
  Rng rng_;
  std::vector<env::Transition> items_;
};

struct EpisodeResult {
  double reward_sum = 0.0;
  std::vector<double> component_sums;
  double fitness = 0.0;
  int length = 0;
};

class EpisodeRunner {
 public:
  EpisodeRunner(const env::Environment& environment, const dsl::RewardProgram& reward)
      : env_(environment),
        reward_(reward),
        obs_(static_cast<std::size_t>(environment.spec().observation_dim)),
        action_(static_cast<std::size_t>(environment.spec().action_dim)),
        before_(static_cast<std::size_t>(environment.spec().registry.flat_size())),
        after_(before_.size()),
        scratch_(reward.scratch_size()),
        components_(reward.size()) {}

  EpisodeResult run(const Policy& policy, std::uint64_t env_seed, Reservoir* reservoir = nullptr) {
    EpisodeResult result;
    result.component_sums.assign(reward_.size(), 0.0);
    env::FitnessAccumulator fitness(env_.spec().fitness_kind);
    env::EnvState state = env_.reset(env_seed);
    const bool sampling = reservoir != nullptr && reservoir->active();
    while (!state.terminated) {
      env_.observe(state, obs_);
      policy.act(obs_, action_);
      if (sampling) env_.bind(state, before_);
      const env::StepEvent event = env_.advance(state, action_);
      env_.bind(state, after_);
      double r = 0.0;
      try {
        r = reward_.evaluate_flat(after_, scratch_, components_);
      } catch (const std::exception& err) {
        throw TrainingFailure(result.length, err.what());
      }
      result.reward_sum += r;
      for (std::size_t c = 0; c < components_.size(); ++c) result.component_sums[c] += components_[c];
      fitness.add(event);
      ++result.length;
      if (sampling) {
        reservoir->offer([&] {
          env::Transition t;
          t.binding_before = before_;
          t.action.assign(state.last_action.begin(), state.last_action.begin() + env_.spec().action_dim);
          t.binding_after = after_;
          t.terminated = event.terminated;
          t.fitness_increment = event.fitness_increment;
          t.success = event.success;
          t.miss = event.miss;
          return t;
        });
      }
    }
    result.fitness = fitness.value();
    return result;
  }

 private:
  const env::Environment& env_;
  const dsl::RewardProgram& reward_;
  std::vector<double> obs_, action_, before_, after_, scratch_, components_;
};

PolicyEvaluation evaluate_with(EpisodeRunner& runner, std::size_t components, const Policy& policy,
                               std::uint64_t seed, int episodes, Reservoir* reservoir) {
  PolicyEvaluation out;
  out.component_means.assign(components, 0.0);
  for (int i = 0; i < episodes; ++i) {
    auto ep = runner.run(policy, derive_seed(seed, {static_cast<std::uint64_t>(i)}), reservoir);
    out.fitness += ep.fitness;
    out.episode_length_mean += ep.length;
    for (std::size_t c = 0; c < components; ++c) out.component_means[c] += ep.component_sums[c];
  }
  out.fitness /= episodes;
  out.episode_length_mean /= episodes;
  for (double& v : out.component_means) v /= episodes;
  return out;
}

void check_reward(const env::EnvironmentSpec& spec, const dsl::RewardProgram& reward) {
  if (!(reward.registry() == spec.registry)) {
    throw std::invalid_argument("reward program was not parsed against the " + spec.id + " registry");
  }
}

}  // namespace

PolicyEvaluation evaluate_policy(const env::Environment& environment, const dsl::RewardProgram& reward,
                                 const Policy& policy, std::uint64_t seed, int episodes) {
  check_reward(environment.spec(), reward);
  if (episodes < 1) throw std::invalid_argument("episodes must be at least 1");
  EpisodeRunner runner(environment, reward);
  return evaluate_with(runner, reward.size(), policy, seed, episodes, nullptr);
}

std::pair<Policy, TrainingReport> train_policy(const env::Environment& environment,
                                               const dsl::RewardProgram& reward, const TrainerConfig& cfg,
                                               const Policy* warm_start) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate();
  const auto& spec = environment.spec();
  check_reward(spec, reward);
  const int obs_dim = spec.observation_dim;
  const int act_dim = spec.action_dim;

  std::vector<double> initial_mean = Policy::zeros(obs_dim, act_dim).parameters();
  if (warm_start != nullptr) {
    if (warm_start->observation_dim != obs_dim || warm_start->action_dim != act_dim) {
      throw std::invalid_argument("warm-start policy shape does not match " + spec.id);
    }
    initial_mean = warm_start->parameters();
  }
  CrossEntropyMethod cem(initial_mean, cfg.initial_std, {cfg.population, cfg.elite_fraction, cfg.noise_floor});

  const std::uint64_t eval_seed = derive_seed(cfg.seed, {hash_label("eval")});
  EpisodeRunner eval_runner(environment, reward);
  Reservoir reservoir(static_cast<std::size_t>(cfg.transition_sample_cap),
                      derive_seed(cfg.seed, {hash_label("reservoir")}));

  TrainingReport report;
  report.initial_fitness =
      evaluate_with(eval_runner, reward.size(), Policy::from_parameters(obs_dim, act_dim, cem.mean()), eval_seed,
                    cfg.eval_episodes, nullptr)
          .fitness;

  const auto names = reward.component_names();
  const auto snapshot_at = checkpoint_generations(cfg);
  std::size_t next_snapshot = 0;
  Policy best_policy = Policy::from_parameters(obs_dim, act_dim, cem.mean());
  double best_fitness = -std::numeric_limits<double>::infinity();

  const auto workers = static_cast<std::size_t>(cfg.workers);
  std::vector<EpisodeRunner> runners;
  runners.reserve(static_cast<std::size_t>(cfg.population));
  for (int i = 0; i < cfg.population; ++i) runners.emplace_back(environment, reward);
  std::vector<double> scores(static_cast<std::size_t>(cfg.population));

  for (int g = 1; g <= cfg.generations; ++g) {
    if (!report.aborted) {
      const auto gen = static_cast<std::uint64_t>(g);
      const auto samples = cem.sample(derive_seed(cfg.seed, {hash_label("population"), gen}));
      parallel_for(samples.size(), workers, [&](std::size_t i) {
        const Policy candidate = Policy::from_parameters(obs_dim, act_dim, samples[i]);
        double total = 0.0;
        for (int r = 0; r < cfg.rollouts_per_candidate; ++r) {
          const auto env_seed = derive_seed(cfg.seed, {hash_label("rollout"), gen, static_cast<std::uint64_t>(r)});
          total += runners[i].run(candidate, env_seed).reward_sum;
        }
        scores[i] = total / cfg.rollouts_per_candidate;
      });
      cem.update(samples, scores);

      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
      if (cfg.time_budget_s > 0.0 && elapsed.count() > cfg.time_budget_s) {
        report.aborted = true;
        report.note = "time budget of " + std::to_string(cfg.time_budget_s) + " s exhausted after generation " +
                      std::to_string(g) + "; training stopped early";
      }
    }

    if (next_snapshot < snapshot_at.size() && g == snapshot_at[next_snapshot]) {
      ++next_snapshot;
      const Policy policy = Policy::from_parameters(obs_dim, act_dim, cem.mean());
      const auto eval = evaluate_with(eval_runner, reward.size(), policy, eval_seed, cfg.eval_episodes, &reservoir);
      Snapshot snap;
      snap.generation = g;
      snap.fitness = eval.fitness;
      snap.episode_length_mean = eval.episode_length_mean;
      for (std::size_t c = 0; c < names.size(); ++c) snap.component_means.emplace_back(names[c], eval.component_means[c]);
      report.checkpoint_snapshots.push_back(std::move(snap));
      if (eval.fitness > best_fitness) {
        best_fitness = eval.fitness;
        best_policy = policy;
      }
    }
  }

  report.final_fitness = best_fitness;
  report.transitions_sample = reservoir.take();
  report.wall_time = std::chrono::steady_clock::now() - start;
  return {std::move(best_policy), std::move(report)};
}

std::pair<Policy, TrainingReport> train_policy(const env::EnvironmentSpec& spec, const dsl::RewardProgram& reward,
                                               const TrainerConfig& cfg, const Policy* warm_start) {
  return train_policy(env::get_environment(spec.id), reward, cfg, warm_start);
}

double evaluate_policy_final(const env::EnvironmentSpec& spec, const dsl::RewardProgram& reward,
                             const TrainerConfig& cfg, int runs) {
  if (runs < 1) throw std::invalid_argument("runs must be at least 1");
  double sum = 0.0;
  for (int i = 0; i < runs; ++i) {
    TrainerConfig run_cfg = cfg;
    run_cfg.seed = cfg.seed + static_cast<std::uint64_t>(i);
    sum += train_policy(spec, reward, run_cfg).second.final_fitness;
  }
  return sum / runs;
}

}  // namespace rewardevo::opt
