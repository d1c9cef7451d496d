#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "rewardevo/env/environment.hpp"

using namespace rewardevo;
using namespace rewardevo::env;

namespace {

std::vector<double> zeros(const Environment& env) {
  return std::vector<double>(static_cast<std::size_t>(env.spec().action_dim), 0.0);
}

// Noisy proportional controller so that goal-based episodes contain
// successes as well as misses.
std::vector<double> noisy_action(const Environment& env, const EnvState& s, std::mt19937_64& rng,
                                 double gain) {
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> obs(static_cast<std::size_t>(env.spec().observation_dim));
  env.observe(s, obs);
  std::vector<double> a(static_cast<std::size_t>(env.spec().action_dim));
  if (env.spec().id == "cartpole") {
    a[0] = gain * (obs[2] + 0.3 * obs[3]) + noise(rng);
  } else {
    for (std::size_t i = 0; i < 2; ++i) a[i] = gain * (3.0 * (obs[4 + i] - obs[i]) - 1.5 * obs[2 + i]) + noise(rng);
  }
  return a;
}

std::vector<Transition> rollout(const Environment& env, std::uint64_t seed, std::mt19937_64& rng,
                                double gain) {
  std::vector<Transition> out;
  EnvState s = env.reset(seed);
  while (!s.terminated) {
    auto [next, t] = env.step(s, noisy_action(env, s, rng, gain));
    out.push_back(std::move(t));
    s = next;
  }
  return out;
}

double var(const Environment& env, const std::vector<double>& flat, const char* name, int i = 0) {
  return flat.at(static_cast<std::size_t>(env.spec().registry.find(name)->offset + i));
}

double planar_distance(const Environment& env, const std::vector<double>& flat) {
  return std::hypot(var(env, flat, "pos", 0) - var(env, flat, "target", 0),
                    var(env, flat, "pos", 1) - var(env, flat, "target", 1));
}

// Fitness written from each one-line definition, reading only the bindings.
double oracle_fitness(const Environment& env, const std::vector<Transition>& ts) {
  const auto& spec = env.spec();
  switch (spec.fitness_kind) {
    case FitnessKind::duration:
      return static_cast<double>(ts.size());
    case FitnessKind::neg_distance: {
      double sum = 0.0;
      for (const auto& t : ts) sum += -planar_distance(env, t.binding_after);
      return sum / static_cast<double>(ts.size());
    }
    case FitnessKind::indicator:
      for (const auto& t : ts) {
        if (planar_distance(env, t.binding_after) < spec.success_threshold) return 1.0;
      }
      return 0.0;
    case FitnessKind::consecutive_successes: {
      // A new waypoint appearing after a step that did not attain the
      // previous one breaks the run.
      int run = 0;
      int best = 0;
      bool last_attained = false;
      for (const auto& t : ts) {
        const bool switched = var(env, t.binding_before, "target", 0) != var(env, t.binding_after, "target", 0) ||
                              var(env, t.binding_before, "target", 1) != var(env, t.binding_after, "target", 1);
        if (switched && !last_attained) run = 0;
        last_attained = planar_distance(env, t.binding_after) < spec.success_threshold;
        if (last_attained) best = std::max(best, ++run);
      }
      return best;
    }
  }
  return NAN;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Environments, CreateIsDeterministicPerSeed) {
  EXPECT_EQ(create_environment("cartpole", 7), create_environment("cartpole", 7));
  EXPECT_NE(create_environment("cartpole", 7), create_environment("cartpole", 8));
  EXPECT_THROW(create_environment("unknown_env", 0), EnvironmentError);
  EXPECT_EQ(environment_ids(),
            (std::vector<std::string>{"cartpole", "pointmass_reach", "reach_success", "waypoint_relay"}));
}

TEST(Environments, PointMassStartsAtOriginWithSeededTarget) {
  const auto& env = get_environment("pointmass_reach");
  auto s0 = create_environment("pointmass_reach", 0);
  std::vector<double> flat(static_cast<std::size_t>(env.spec().registry.flat_size()));
  env.bind(s0, flat);
  EXPECT_EQ(var(env, flat, "pos", 0), 0.0);
  EXPECT_EQ(var(env, flat, "pos", 1), 0.0);
  EXPECT_LE(std::fabs(var(env, flat, "target", 0)), 1.0);
  EXPECT_NE(var(env, flat, "target", 0), var(env, [&] {
              std::vector<double> f(flat.size());
              env.bind(create_environment("pointmass_reach", 1), f);
              return f;
            }(), "target", 0));
}

TEST(Environments, SpecInvariantsAndFixtures) {
  for (const auto& id : environment_ids()) {
    const auto& spec = get_environment(id).spec();
    EXPECT_GE(spec.action_dim, 1);
    EXPECT_GE(spec.episode_length, 1);
    EXPECT_EQ(spec.registry.find("action")->dimension, spec.action_dim) << id;
    EXPECT_NO_THROW(dsl::parse_program(spec.human_reward, spec.registry)) << id;
    EXPECT_NO_THROW(dsl::parse_program(spec.sparse_reward, spec.registry)) << id;
  }
}

TEST(Step, ZeroForceLeavesPointInPlace) {
  for (const char* id : {"pointmass_reach", "reach_success", "waypoint_relay"}) {
    const auto& env = get_environment(id);
    auto s = env.reset(3);
    s.values[0] = 0.25;
    s.values[1] = -0.5;
    s.values[6] = 0.0;  // reach_success drift
    s.values[7] = 0.0;
    auto [next, t] = env.step(s, zeros(env));
    EXPECT_EQ(next.values[0], 0.25);
    EXPECT_EQ(next.values[1], -0.5);
  }
}

TEST(Step, ReachSuccessDriftIsSeededBoundedAndHidden) {
  const auto& env = get_environment("reach_success");
  bool moved = false;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = env.reset(seed);
    EXPECT_EQ(s, env.reset(seed));
    EXPECT_LE(std::hypot(s.values[6], s.values[7]), 1.0);
    std::vector<double> obs(static_cast<std::size_t>(env.spec().observation_dim));
    env.observe(s, obs);
    EXPECT_EQ(obs, std::vector<double>(s.values.begin(), s.values.begin() + 6));
    auto [next, t] = env.step(s, zeros(env));
    moved = moved || next.values[0] != s.values[0] || next.values[1] != s.values[1];
  }
  EXPECT_TRUE(moved);
  EXPECT_EQ(get_environment("pointmass_reach").reset(4).values[6], 0.0);
}

TEST(Step, CartPoleTerminationRule) {
  const auto& env = get_environment("cartpole");
  auto s = env.reset(0);
  s.values = {0, 0, 0.3, 0};
  EXPECT_TRUE(env.step(s, zeros(env)).second.terminated);
  s.values = {2.45, 0, 0, 0};
  EXPECT_TRUE(env.step(s, zeros(env)).second.terminated);
  s.values = {0, 0, 0.01, 0};
  EXPECT_FALSE(env.step(s, zeros(env)).second.terminated);
}

TEST(Step, ErrorsAndClamping) {
  const auto& env = get_environment("pointmass_reach");
  auto s = env.reset(1);
  EXPECT_THROW(env.step(s, std::vector<double>{1.0}), EnvironmentError);
  auto [next, t] = env.step(s, std::vector<double>{5.0, -7.0});
  EXPECT_EQ(t.action, (std::vector<double>{1.0, -1.0}));
  EXPECT_EQ(var(env, t.binding_after, "action", 0), 1.0);
  next.terminated = true;
  EXPECT_THROW(env.step(next, zeros(env)), EnvironmentError);
}

TEST(Step, BudgetTerminatesPointMass) {
  const auto& env = get_environment("pointmass_reach");
  auto s = env.reset(2);
  int steps = 0;
  while (!s.terminated) {
    s = env.step(s, zeros(env)).first;
    ++steps;
  }
  EXPECT_EQ(steps, env.spec().episode_length);
  EXPECT_EQ(s.step_index, env.spec().episode_length);
}

TEST(Step, RelaySwitchesToNextWaypointAfterAttainment) {
  const auto& env = get_environment("waypoint_relay");
  auto s = env.reset(0);
  s.values[0] = s.values[4] - 0.05;  // inside the threshold of waypoint 0
  s.values[1] = s.values[5];
  const double old_x = s.values[4];
  auto [s1, t1] = env.step(s, zeros(env));
  ASSERT_TRUE(t1.success);
  EXPECT_EQ(var(env, t1.binding_after, "target", 0), old_x);
  auto [s2, t2] = env.step(s1, zeros(env));
  EXPECT_EQ(s2.waypoint_index, 1);
  EXPECT_NEAR(var(env, t2.binding_after, "target", 0), 0.0, 1e-12);
  EXPECT_NEAR(var(env, t2.binding_after, "target", 1), 0.8, 1e-12);
}

TEST(Step, DeterministicTransitions) {
  for (const auto& id : environment_ids()) {
    const auto& env = get_environment(id);
    std::mt19937_64 a(5);
    std::mt19937_64 b(5);
    EXPECT_EQ(rollout(env, 11, a, 1.0), rollout(env, 11, b, 1.0)) << id;
  }
}

TEST(ComputeFitness, Examples) {
  const auto& cart = get_environment("cartpole");
  std::vector<Transition> alive(200);
  alive.back().terminated = true;
  EXPECT_EQ(compute_fitness(alive, cart.spec()), 200.0);
  EXPECT_THROW(compute_fitness(std::vector<Transition>{}, cart.spec()), EnvironmentError);

  std::vector<Transition> never(60);
  EXPECT_EQ(compute_fitness(never, get_environment("reach_success").spec()), 0.0);

  std::vector<Transition> relay(6);
  relay[0].success = relay[1].success = relay[2].success = true;
  relay[3].miss = true;
  relay[4].success = true;
  EXPECT_EQ(compute_fitness(relay, get_environment("waypoint_relay").spec()), 3.0);
}

TEST(ComputeFitness, MatchesOracleOnRandomEpisodes) {
  for (const auto& id : environment_ids()) {
    const auto& env = get_environment(id);
    std::mt19937_64 rng(2024);
    int nonzero = 0;
    for (int episode = 0; episode < 100; ++episode) {
      const double gain = (episode % 4) * 0.5;
      auto ts = rollout(env, static_cast<std::uint64_t>(episode), rng, gain);
      const double got = compute_fitness(ts, env.spec());
      const double want = oracle_fitness(env, ts);
      ASSERT_NEAR(got, want, 1e-12) << id << " episode " << episode;
      if (want != 0.0) ++nonzero;
    }
    EXPECT_GT(nonzero, 10) << id;
  }
}

TEST(Relay, WaypointIndexNeverDecreases) {
  const auto& env = get_environment("waypoint_relay");
  std::mt19937_64 rng(8);
  for (int episode = 0; episode < 50; ++episode) {
    auto s = env.reset(static_cast<std::uint64_t>(episode));
    int last = s.waypoint_index;
    while (!s.terminated) {
      s = env.step(s, noisy_action(env, s, rng, episode % 3 * 0.5)).first;
      ASSERT_GE(s.waypoint_index, last);
      last = s.waypoint_index;
    }
  }
}

TEST(RenderContext, MatchesGoldenAndOmitsScoring) {
  const bool update = std::getenv("REWARDEVO_UPDATE_GOLDEN") != nullptr;
  for (const auto& id : environment_ids()) {
    const auto& spec = get_environment(id).spec();
    const std::string doc = render_context(spec);
    EXPECT_EQ(doc, render_context(spec));
    EXPECT_EQ(doc.find("fitness"), std::string::npos) << id;
    for (const auto& var : spec.registry.entries()) {
      EXPECT_NE(doc.find("- " + var.name + ":"), std::string::npos) << var.name;
    }
    const std::string path = std::string(REWARDEVO_TEST_DATA_DIR) + "/golden/context_" + id + ".txt";
    if (update) std::ofstream(path, std::ios::binary) << doc;
    EXPECT_EQ(doc, read_file(path)) << path;
  }
}
