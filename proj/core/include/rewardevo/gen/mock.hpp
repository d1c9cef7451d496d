#pragma once

#include "rewardevo/gen/generator.hpp"

namespace rewardevo::gen {

// Offline stand-in for the language model. Draws programs from a seeded
// grammar sampler built from the registry: distance-shaping idioms, action
// and velocity penalties, and random expressions. With a prior program it
// mostly mutates that program, and when component series are visible in the
// feedback it prefers to mutate components whose values never moved.
class MockGenerator final : public Generator {
 public:
  struct Options {
    double idiom_share = 0.6;
    double penalty_share = 0.2;  // remainder: random expressions
    double error_rate = 0.05;    // responses deliberately made unparseable
    double fresh_share = 0.25;   // with a prior: proposals ignoring it
  };

  MockGenerator() = default;
  explicit MockGenerator(Options options) : options_(options) {}

  std::string_view kind() const noexcept override { return "mock"; }
  // Sample i uses the stream derived from (ctx.sample_seed, i).
  std::vector<Proposal> propose(const GeneratorContext& ctx, int k, double temperature) override;

 private:
  Options options_;
};

}  // namespace rewardevo::gen
