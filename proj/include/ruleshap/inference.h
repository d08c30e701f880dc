#ifndef RULESHAP_INFERENCE_H_
#define RULESHAP_INFERENCE_H_

#include <Eigen/Dense>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ruleshap/dataset.h"
#include "ruleshap/model.h"
#include "ruleshap/shapley.h"

namespace ruleshap {

// Throws ValidationError unless 0 < alpha < 1.
void CheckAlpha(double alpha);

struct CellSummary {
  double mean = 0.0;
  double sd = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool significant = false;  // lower > 0 or upper < 0
};

CellSummary SummarizeCell(std::span<const double> draws, double alpha);

// One summary per column of a draws x probes slice.
std::vector<CellSummary> SummarizeSlice(const Eigen::MatrixXd& slice,
                                        double alpha);

inline constexpr std::size_t kMinDrawsForQuantiles = 100;

struct EffectReport {
  double alpha = 0.05;
  std::size_t rows = 0;
  std::vector<std::string> features;
  std::vector<std::vector<CellSummary>> cells;  // [feature][row]
  std::vector<double> rejection_rate;           // per feature
  std::vector<std::string> warnings;

  explicit EffectReport(double a = 0.05) : alpha(a) { CheckAlpha(a); }
  void AddFeature(const std::string& name, const Eigen::MatrixXd& slice);
  void AddFeature(const std::string& name, std::vector<CellSummary> cells);
};

EffectReport MakeEffectReport(const ShapleyCube& cube, double alpha);

struct GroupRate {
  std::string group;
  double rate = 0.0;
  std::size_t features = 0;
};

// Mean per-feature rejection rate within each group, in order of first
// appearance. Every feature of the report must be assigned a group.
std::vector<GroupRate> RejectionRates(
    const EffectReport& report,
    const std::map<std::string, std::string>& grouping);

struct PairCells {
  std::size_t a = 0;
  std::size_t b = 0;
  std::vector<CellSummary> cells;  // per row
};

struct InteractionReport {
  double alpha = 0.05;
  std::size_t rows = 0;
  std::vector<std::string> features;
  std::vector<PairCells> pairs;
  // Symmetric features x features summaries over significant rows only.
  Eigen::MatrixXi counts;
  Eigen::MatrixXd mean_abs;

  InteractionReport(std::vector<std::string> names, std::size_t n_rows,
                    double a = 0.05);
  void AddPair(std::size_t a, std::size_t b, const Eigen::MatrixXd& slice);
  void AddPair(std::size_t a, std::size_t b, std::vector<CellSummary> cells);
};

InteractionReport MakeInteractionReport(const ShapleyCube& cube, double alpha);

// RuleFit-style importances per original feature, from posterior-mean
// coefficients. Dummy columns of one factor are summed.
std::vector<double> RulefitLocalImportance(const FittedModel& model,
                                           const Dataset& data,
                                           std::span<const double> probe);
std::vector<double> RulefitGlobalImportance(const FittedModel& model,
                                            const Dataset& data);

// --- CSV I/O ---------------------------------------------------------------

// row_id,feature,mean,lower,upper,significant
void WriteEffectCsv(const EffectReport& report, const std::string& path);
EffectReport ReadEffectCsv(const std::string& path, double alpha);

// row_id,feature_a,feature_b,mean,lower,upper,significant
void WriteInteractionCsv(const InteractionReport& report,
                         const std::string& path);
// Features are indexed in `feature_order` first, then by first appearance.
InteractionReport ReadInteractionCsv(
    const std::string& path, double alpha,
    const std::vector<std::string>& feature_order = {});

// feature,rejection_rate
void WriteFeatureRatesCsv(const EffectReport& report, const std::string& path);
// group,rejection_rate,features
void WriteGroupRatesCsv(const std::vector<GroupRate>& rates,
                        const std::string& path);
// feature_a,feature_b,count,mean_abs
void WriteInteractionHeatCsv(const InteractionReport& report,
                             const std::string& path);

// Two-column CSV "feature,group" with a header line.
std::map<std::string, std::string> ReadGrouping(const std::string& path);

}  // namespace ruleshap

#endif  // RULESHAP_INFERENCE_H_
