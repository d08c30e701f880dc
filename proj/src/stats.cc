#include "ruleshap/stats.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ruleshap {

double SortedQuantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  if (sorted.size() == 1) return sorted.front();
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double Quantile(std::span<const double> values, double q) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return SortedQuantile(sorted, q);
}

double Mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

namespace {

double SumSquaredDeviation(std::span<const double> values, double mean) {
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return ss;
}

}  // namespace

double PopulationSd(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::sqrt(SumSquaredDeviation(values, Mean(values)) /
                   static_cast<double>(values.size()));
}

double SampleSd(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  return std::sqrt(SumSquaredDeviation(values, Mean(values)) /
                   static_cast<double>(values.size() - 1));
}

IntervalSummary Summarize(std::span<const double> draws, double alpha) {
  std::vector<double> sorted(draws.begin(), draws.end());
  std::sort(sorted.begin(), sorted.end());
  IntervalSummary out;
  out.mean = Mean(draws);
  out.sd = SampleSd(draws);
  out.lower = SortedQuantile(sorted, alpha / 2.0);
  out.upper = SortedQuantile(sorted, 1.0 - alpha / 2.0);
  return out;
}

Rng DeriveRng(std::uint64_t seed, std::uint64_t stream,
              std::uint64_t substream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(substream),
                    static_cast<std::uint32_t>(substream >> 32)};
  return Rng(seq);
}

double SampleInverseGamma(double shape, double rate, Rng& rng) {
  std::gamma_distribution<double> gamma(shape, 1.0);
  return rate / gamma(rng);
}

double StandardNormalCdf(double z) {
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

}  // namespace ruleshap
