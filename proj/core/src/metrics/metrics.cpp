#include "rewardevo/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rewardevo/util/random.hpp"

namespace rewardevo::metrics {
namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

double human_normalized_score(const ScoreTriple& t) {
  if (t.human == t.sparse) throw MetricError("human normalized score undefined: human equals sparse");
  return (t.method - t.sparse) / std::fabs(t.human - t.sparse);
}

double clip_for_aggregate(double score) { return std::clamp(score, 0.0, 3.0); }

double mean(std::span<const double> values) {
  if (values.empty()) throw MetricError("mean of an empty list");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double pearson_correlation(std::span<const double> candidate, std::span<const double> reference) {
  if (candidate.size() != reference.size()) throw MetricError("correlation needs paired samples");
  if (candidate.size() < 2) throw MetricError("correlation needs at least 2 pairs");
  const double mx = mean(candidate);
  const double my = mean(reference);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    const double dx = candidate[i] - mx;
    const double dy = reference[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw MetricError("correlation undefined: constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double iqm(std::span<const double> scores) {
  if (scores.size() < 4) throw MetricError("iqm needs at least 4 values");
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t drop = sorted.size() / 4;
  return mean(std::span<const double>(sorted).subspan(drop, sorted.size() - 2 * drop));
}

double prob_improvement(std::span<const double> x, std::span<const double> y) {
  if (x.empty() || y.empty()) throw MetricError("probability of improvement needs nonempty lists");
  double wins = 0.0;
  for (double a : x) {
    for (double b : y) {
      if (a > b) wins += 1.0;
      else if (a == b) wins += 0.5;
    }
  }
  return wins / (static_cast<double>(x.size()) * static_cast<double>(y.size()));
}

Interval bootstrap_ci(std::span<const double> scores, const Statistic& statistic, double level, int resamples,
                      std::uint64_t seed) {
  if (scores.size() < 2) throw MetricError("bootstrap needs at least 2 values");
  if (!(level > 0.0 && level < 1.0)) throw MetricError("confidence level must be in (0, 1)");
  if (resamples < 1) throw MetricError("resamples must be positive");
  Rng rng = make_rng(derive_seed(seed, {hash_label("bootstrap")}));
  std::uniform_int_distribution<std::size_t> pick(0, scores.size() - 1);
  std::vector<double> sample(scores.size());
  std::vector<double> stats(static_cast<std::size_t>(resamples));
  for (auto& s : stats) {
    for (auto& v : sample) v = scores[pick(rng)];
    s = statistic(sample);
  }
  std::sort(stats.begin(), stats.end());
  return {quantile_sorted(stats, (1.0 - level) / 2.0), quantile_sorted(stats, (1.0 + level) / 2.0)};
}

}  // namespace rewardevo::metrics
