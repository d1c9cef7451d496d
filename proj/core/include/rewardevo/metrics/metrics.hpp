#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace rewardevo::metrics {

// A metric whose inputs leave it undefined (equal anchors, constant series,
// too few values).
class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ScoreTriple {
  double method = 0.0;
  double sparse = 0.0;
  double human = 0.0;
};

// (method - sparse) / |human - sparse|, unclipped.
double human_normalized_score(const ScoreTriple& t);

// Clamp to [0, 3]; applied only when averaging across tasks.
double clip_for_aggregate(double score);

double pearson_correlation(std::span<const double> candidate, std::span<const double> reference);

// Mean of the middle half of the sorted values. Needs at least 4 values; the
// number dropped at each end is floor(n / 4).
double iqm(std::span<const double> scores);

// Mean over all pairs of 1[x > y] + 0.5 * 1[x == y].
double prob_improvement(std::span<const double> x, std::span<const double> y);

using Statistic = std::function<double(std::span<const double>)>;

double mean(std::span<const double> values);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const Interval&, const Interval&) = default;
};

// Percentile bootstrap. The bounds are the (1-level)/2 and (1+level)/2
// quantiles of the resampled statistic, linearly interpolated.
Interval bootstrap_ci(std::span<const double> scores, const Statistic& statistic, double level = 0.95,
                      int resamples = 2000, std::uint64_t seed = 0);

}  // namespace rewardevo::metrics
