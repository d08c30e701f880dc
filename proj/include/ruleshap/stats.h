#ifndef RULESHAP_STATS_H_
#define RULESHAP_STATS_H_

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace ruleshap {

using Rng = std::mt19937_64;

// Empirical quantile of an ascending-sorted sample, interpolating linearly
// between order statistics at plotting position (k-1)/(n-1).
double SortedQuantile(std::span<const double> sorted, double q);

// Same as SortedQuantile but sorts a copy first.
double Quantile(std::span<const double> values, double q);

double Mean(std::span<const double> values);

// Population (1/n) standard deviation.
double PopulationSd(std::span<const double> values);

// Sample (1/(n-1)) standard deviation; 0 for fewer than two values.
double SampleSd(std::span<const double> values);

struct IntervalSummary {
  double mean = 0.0;
  double sd = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

// Mean, sample sd and equal-tailed (alpha/2, 1-alpha/2) interval.
IntervalSummary Summarize(std::span<const double> draws, double alpha);

// Deterministic child generator for stream `stream` of `seed`.
Rng DeriveRng(std::uint64_t seed, std::uint64_t stream,
              std::uint64_t substream = 0);

// X ~ InvGamma(shape, rate), i.e. 1/X ~ Gamma(shape, rate).
double SampleInverseGamma(double shape, double rate, Rng& rng);

double StandardNormalCdf(double z);

}  // namespace ruleshap

#endif  // RULESHAP_STATS_H_
