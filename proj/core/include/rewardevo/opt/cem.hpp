#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace rewardevo::opt {

struct CemParams {
  int population = 64;
  double elite_fraction = 0.125;
  double noise_floor = 0.01;
};

// Diagonal-Gaussian cross-entropy method over a real parameter vector.
// Higher scores are better.
class CrossEntropyMethod {
 public:
  CrossEntropyMethod(std::vector<double> mean, double initial_std, CemParams params);

  // population samples; member i draws from a stream derived from (seed, i).
  std::vector<std::vector<double>> sample(std::uint64_t seed) const;

  // Refits mean and stddev to the elite samples. Ties are broken towards the
  // lower sample index.
  void update(const std::vector<std::vector<double>>& samples, std::span<const double> scores);

  const std::vector<double>& mean() const noexcept { return mean_; }
  const std::vector<double>& stddev() const noexcept { return stddev_; }
  int elite_count() const noexcept { return elite_count_; }
  const CemParams& params() const noexcept { return params_; }

 private:
  CemParams params_;
  int elite_count_;
  std::vector<double> mean_;
  std::vector<double> stddev_;
};

}  // namespace rewardevo::opt
