#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <numbers>

#include "rewardevo/env/environment.hpp"
#include "rewardevo/util/random.hpp"

namespace rewardevo::env {
namespace {

using dsl::VarKind;

// Cart-pole with the classic constants and explicit Euler integration.
// values: [cart_pos, cart_vel, pole_angle, pole_vel]
class CartPole final : public Environment {
 public:
  static constexpr double kGravity = 9.8;
  static constexpr double kCartMass = 1.0;
  static constexpr double kPoleMass = 0.1;
  static constexpr double kHalfLength = 0.5;
  static constexpr double kForce = 10.0;
  static constexpr double kDt = 0.02;
  static constexpr double kAngleLimit = 0.21;
  static constexpr double kPositionLimit = 2.4;

  CartPole() : Environment(make_spec()) {}

  EnvState reset(std::uint64_t seed) const override {
    EnvState s;
    s.rng_seed = seed;
    auto rng = make_rng(derive_seed(seed, {hash_label("cartpole/init")}));
    std::uniform_real_distribution<double> init(-0.05, 0.05);
    for (int i = 0; i < 4; ++i) s.values[static_cast<std::size_t>(i)] = init(rng);
    return s;
  }

  void observe(const EnvState& s, std::span<double> obs) const override {
    std::copy_n(s.values.begin(), 4, obs.begin());
  }

  void bind(const EnvState& s, std::span<double> flat) const override {
    std::copy_n(s.values.begin(), 4, flat.begin());
    flat[4] = s.last_action[0];
  }

 protected:
  StepEvent simulate(EnvState& s, std::span<const double> action) const override {
    constexpr double total_mass = kCartMass + kPoleMass;
    constexpr double pole_mass_length = kPoleMass * kHalfLength;
    auto& v = s.values;
    const double force = kForce * action[0];
    const double cos_t = std::cos(v[2]);
    const double sin_t = std::sin(v[2]);
    const double temp = (force + pole_mass_length * v[3] * v[3] * sin_t) / total_mass;
    const double theta_acc = (kGravity * sin_t - cos_t * temp) /
                             (kHalfLength * (4.0 / 3.0 - kPoleMass * cos_t * cos_t / total_mass));
    const double x_acc = temp - pole_mass_length * theta_acc * cos_t / total_mass;
    v[0] += kDt * v[1];
    v[1] += kDt * x_acc;
    v[2] += kDt * v[3];
    v[3] += kDt * theta_acc;

    StepEvent e;
    e.fitness_increment = 1.0;
    e.terminated = std::fabs(v[2]) > kAngleLimit || std::fabs(v[0]) > kPositionLimit;
    return e;
  }

 private:
  static EnvironmentSpec make_spec() {
    EnvironmentSpec spec;
    spec.id = "cartpole";
    spec.task_description =
        "Balance a pole hinged on top of a cart by pushing the cart left or right. "
        "Keep the pole upright and the cart on the track for as long as possible.";
    spec.registry = dsl::VarRegistry({
        {"cart_pos", VarKind::scalar, 1, "cart position along the track, 0 is the center", "m"},
        {"cart_vel", VarKind::scalar, 1, "cart velocity", "m/s"},
        {"pole_angle", VarKind::scalar, 1, "pole angle from vertical, 0 is upright", "rad"},
        {"pole_vel", VarKind::scalar, 1, "pole angular velocity", "rad/s"},
        {"action", VarKind::vector, 1, "push applied this step, positive pushes right", ""},
    });
    spec.observation_dim = 4;
    spec.action_dim = 1;
    spec.episode_length = 200;
    spec.fitness_kind = FitnessKind::duration;
    spec.human_reward =
        "alive = 1\n"
        "upright = -2 * square(pole_angle)\n"
        "centered = -0.1 * square(cart_pos)\n";
    spec.sparse_reward = "alive = 1\n";
    return spec;
  }
};

enum class TargetMode { fixed, resample_on_success, relay };

// Point mass in a bounded plane with linear drag.
// values: [pos_x, pos_y, vel_x, vel_y, target_x, target_y, drift_x, drift_y]
// The drift is a constant acceleration drawn per episode; it is not observed.
class PointMass final : public Environment {
 public:
  static constexpr double kDt = 0.05;
  static constexpr double kAccel = 4.0;
  static constexpr double kDrag = 1.0;
  static constexpr double kArena = 2.0;
  static constexpr double kRelayRadius = 0.8;
  static constexpr int kRelayWaypoints = 4;

  PointMass(EnvironmentSpec spec, TargetMode mode, int goal_timeout, double max_drift = 0.0)
      : Environment(std::move(spec)), mode_(mode), goal_timeout_(goal_timeout), max_drift_(max_drift) {}

  EnvState reset(std::uint64_t seed) const override {
    EnvState s;
    s.rng_seed = seed;
    set_target(s);
    s.prev_dist = distance(s);
    if (max_drift_ > 0.0) {
      auto rng = make_rng(derive_seed(seed, {hash_label("pointmass/drift")}));
      std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
      std::uniform_real_distribution<double> magnitude(0.0, max_drift_);
      const double a = angle(rng);
      const double m = magnitude(rng);
      s.values[6] = m * std::cos(a);
      s.values[7] = m * std::sin(a);
    }
    return s;
  }

  void observe(const EnvState& s, std::span<double> obs) const override {
    std::copy_n(s.values.begin(), 6, obs.begin());
  }

  void bind(const EnvState& s, std::span<double> flat) const override {
    std::copy_n(s.values.begin(), 6, flat.begin());
    flat[6] = distance(s);
    flat[7] = s.prev_dist;
    flat[8] = s.last_action[0];
    flat[9] = s.last_action[1];
  }

  static std::array<double, 2> relay_waypoint(int index) {
    const double angle = 2.0 * std::numbers::pi * (index % kRelayWaypoints) / kRelayWaypoints;
    return {kRelayRadius * std::cos(angle), kRelayRadius * std::sin(angle)};
  }

 protected:
  StepEvent simulate(EnvState& s, std::span<const double> action) const override {
    if (s.switch_pending) {
      if (mode_ == TargetMode::relay) ++s.waypoint_index;
      else ++s.target_draws;
      set_target(s);
      s.steps_on_waypoint = 0;
      s.switch_pending = false;
    }
    s.prev_dist = distance(s);

    auto& v = s.values;
    for (std::size_t axis = 0; axis < 2; ++axis) {
      double& p = v[axis];
      double& vel = v[axis + 2];
      vel = vel * (1.0 - kDrag * kDt) + (kAccel * action[axis] + v[axis + 6]) * kDt;
      p += vel * kDt;
      if (std::fabs(p) > kArena) {
        p = std::copysign(kArena, p);
        vel = 0.0;
      }
    }

    const double d = distance(s);
    StepEvent e;
    if (mode_ == TargetMode::fixed) {
      e.fitness_increment = -d;
      return e;
    }
    ++s.steps_on_waypoint;
    e.success = d < spec().success_threshold;
    e.fitness_increment = e.success ? 1.0 : 0.0;
    if (e.success) {
      s.switch_pending = true;
    } else if (goal_timeout_ > 0 && s.steps_on_waypoint >= goal_timeout_) {
      e.miss = true;
      s.switch_pending = true;
    }
    return e;
  }

 private:
  static double distance(const EnvState& s) {
    return std::hypot(s.values[0] - s.values[4], s.values[1] - s.values[5]);
  }

  void set_target(EnvState& s) const {
    if (mode_ == TargetMode::relay) {
      const auto w = relay_waypoint(s.waypoint_index);
      s.values[4] = w[0];
      s.values[5] = w[1];
      return;
    }
    auto rng = make_rng(derive_seed(s.rng_seed, {hash_label("pointmass/target"), s.target_draws}));
    if (mode_ == TargetMode::fixed) {
      std::uniform_real_distribution<double> coord(-1.0, 1.0);
      s.values[4] = coord(rng);
      s.values[5] = coord(rng);
    } else {
      std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
      std::uniform_real_distribution<double> radius(0.5, 1.2);
      const double a = angle(rng);
      const double r = radius(rng);
      s.values[4] = r * std::cos(a);
      s.values[5] = r * std::sin(a);
    }
  }

  TargetMode mode_;
  int goal_timeout_;
  double max_drift_;
};

dsl::VarRegistry pointmass_registry(const char* target_description) {
  return dsl::VarRegistry({
      {"pos", VarKind::vector, 2, "position of the point mass in the plane", "m"},
      {"vel", VarKind::vector, 2, "velocity of the point mass", "m/s"},
      {"target", VarKind::vector, 2, target_description, "m"},
      {"dist", VarKind::scalar, 1, "distance from pos to target", "m"},
      {"prev_dist", VarKind::scalar, 1, "distance to target before this step", "m"},
      {"action", VarKind::vector, 2, "acceleration command applied this step", ""},
  });
}

std::unique_ptr<Environment> make_pointmass_reach() {
  EnvironmentSpec spec;
  spec.id = "pointmass_reach";
  spec.task_description =
      "Steer a point mass in the plane so that it moves to the target position "
      "and stays as close to it as possible.";
  spec.registry = pointmass_registry("target position, fixed for the episode");
  spec.observation_dim = 6;
  spec.action_dim = 2;
  spec.episode_length = 100;
  spec.fitness_kind = FitnessKind::neg_distance;
  spec.human_reward =
      "reach = -dist\n"
      "effort = -0.1 * dot(action, action)\n";
  spec.sparse_reward = "neg_dist = -dist\n";
  return std::make_unique<PointMass>(std::move(spec), TargetMode::fixed, 0);
}

std::unique_ptr<Environment> make_reach_success() {
  EnvironmentSpec spec;
  spec.id = "reach_success";
  spec.task_description =
      "Steer a point mass in the plane until it is within 0.1 m of the target position. "
      "Once reached, a new target appears elsewhere. A steady current of unknown direction "
      "and strength pushes the point mass.";
  spec.registry = pointmass_registry("current target position");
  spec.observation_dim = 6;
  spec.action_dim = 2;
  spec.episode_length = 60;
  spec.fitness_kind = FitnessKind::indicator;
  spec.success_threshold = 0.1;
  spec.human_reward =
      "approach = -dist\n"
      "effort = -0.05 * dot(action, action)\n";
  spec.sparse_reward = "success = lt(dist, 0.1)\n";
  return std::make_unique<PointMass>(std::move(spec), TargetMode::resample_on_success, 0, 1.0);
}

std::unique_ptr<Environment> make_waypoint_relay() {
  EnvironmentSpec spec;
  spec.id = "waypoint_relay";
  spec.task_description =
      "Steer a point mass through a repeating sequence of waypoints on a circle. "
      "A waypoint counts as reached within 0.1 m; the next waypoint then becomes the target. "
      "A waypoint not reached within 40 steps is skipped.";
  spec.registry = pointmass_registry("current waypoint position");
  spec.observation_dim = 6;
  spec.action_dim = 2;
  spec.episode_length = 200;
  spec.fitness_kind = FitnessKind::consecutive_successes;
  spec.success_threshold = 0.1;
  spec.human_reward =
      "approach = -dist\n"
      "progress = 5 * (prev_dist - dist)\n"
      "effort = -0.05 * dot(action, action)\n";
  spec.sparse_reward = "success = lt(dist, 0.1)\n";
  return std::make_unique<PointMass>(std::move(spec), TargetMode::relay, 40);
}

const std::map<std::string, std::unique_ptr<Environment>, std::less<>>& environments() {
  static const auto table = [] {
    std::map<std::string, std::unique_ptr<Environment>, std::less<>> m;
    m.emplace("cartpole", std::make_unique<CartPole>());
    m.emplace("pointmass_reach", make_pointmass_reach());
    m.emplace("reach_success", make_reach_success());
    m.emplace("waypoint_relay", make_waypoint_relay());
    return m;
  }();
  return table;
}

}  // namespace

const Environment& get_environment(std::string_view id) {
  const auto& table = environments();
  auto it = table.find(id);
  if (it == table.end()) throw EnvironmentError("unknown environment " + std::string(id));
  return *it->second;
}

std::vector<std::string> environment_ids() {
  std::vector<std::string> ids;
  for (const auto& [id, env] : environments()) ids.push_back(id);
  return ids;
}

}  // namespace rewardevo::env
