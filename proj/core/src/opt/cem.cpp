#include "rewardevo/opt/cem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "rewardevo/util/random.hpp"

namespace rewardevo::opt {

CrossEntropyMethod::CrossEntropyMethod(std::vector<double> mean, double initial_std, CemParams params)
    : params_(params), mean_(std::move(mean)) {
  if (params_.population < 1) throw std::invalid_argument("population must be positive");
  if (!(params_.elite_fraction > 0.0 && params_.elite_fraction <= 0.5)) {
    throw std::invalid_argument("elite_fraction must be in (0, 0.5]");
  }
  if (!(params_.noise_floor >= 0.0)) throw std::invalid_argument("noise_floor must be non-negative");
  if (!(initial_std > 0.0)) throw std::invalid_argument("initial_std must be positive");
  elite_count_ = std::max(1, static_cast<int>(std::lround(params_.population * params_.elite_fraction)));
  stddev_.assign(mean_.size(), std::max(initial_std, params_.noise_floor));
}

std::vector<std::vector<double>> CrossEntropyMethod::sample(std::uint64_t seed) const {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(params_.population));
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto rng = make_rng(derive_seed(seed, {i}));
    std::normal_distribution<double> normal(0.0, 1.0);
    auto& x = out[i];
    x.resize(mean_.size());
    for (std::size_t d = 0; d < x.size(); ++d) x[d] = mean_[d] + stddev_[d] * normal(rng);
  }
  return out;
}

void CrossEntropyMethod::update(const std::vector<std::vector<double>>& samples,
                                std::span<const double> scores) {
  if (samples.size() != scores.size() || samples.size() < static_cast<std::size_t>(elite_count_)) {
    throw std::invalid_argument("score count does not match the sample count");
  }
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  const auto n = static_cast<std::size_t>(elite_count_);
  for (std::size_t d = 0; d < mean_.size(); ++d) {
    double sum = 0.0;
    for (std::size_t e = 0; e < n; ++e) sum += samples[order[e]][d];
    const double m = sum / static_cast<double>(n);
    double sq = 0.0;
    for (std::size_t e = 0; e < n; ++e) {
      const double dev = samples[order[e]][d] - m;
      sq += dev * dev;
    }
    mean_[d] = m;
    stddev_[d] = std::max(std::sqrt(sq / static_cast<double>(n)), params_.noise_floor);
  }
}

}  // namespace rewardevo::opt
