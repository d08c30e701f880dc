#ifndef RULESHAP_SHAPLEY_H_
#define RULESHAP_SHAPLEY_H_

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ruleshap/dataset.h"
#include "ruleshap/model.h"
#include "ruleshap/rulegen.h"

namespace ruleshap {

// --- Exact combinatorics ---------------------------------------------------

// C(n, k) in 128-bit arithmetic; throws NumericError instead of wrapping.
unsigned __int128 ExactBinomial(unsigned n, unsigned k);

// sum_{u=0}^{c} C(a+u, u) C(b-u, c-u) == C(a+b+1, c), evaluated exactly.
bool BinomSumIdentityCheck(unsigned a, unsigned b, unsigned c);

// --- Single-rule attributions ----------------------------------------------

// A rule restricted to the columns it involves.
struct ReducedRuleView {
  std::vector<std::size_t> involved;    // column indices, ascending
  std::vector<std::uint8_t> indicators; // rows x p_r, row-major
  std::vector<int> satisfied;           // q(t) per row
  std::size_t rows = 0;

  std::size_t p_r() const { return involved.size(); }
  std::uint8_t at(std::size_t row, std::size_t k) const {
    return indicators[row * involved.size() + k];
  }
};

ReducedRuleView ReduceRule(const Rule& rule, const Dataset& data);

// Marginal attributions of coeff * r(x) at `probe`, one per data column.
// Columns outside the rule receive exactly zero.
std::vector<double> RuleShapley(const Rule& rule, double coeff,
                                const Dataset& data,
                                std::span<const double> probe);

// Pairwise interaction attribution of coeff * r(x) for columns j != j2.
double RuleInteractionShapley(const Rule& rule, double coeff,
                              const Dataset& data,
                              std::span<const double> probe, std::size_t j,
                              std::size_t j2);

// b_j (x*_j - xbar_j).
inline double LinearShapley(double b, double mean, double x) {
  return b * (x - mean);
}

// --- Enumeration oracle ----------------------------------------------------

using PointFunction = std::function<double(std::span<const double>)>;

enum class ShapleyMode { kMarginal, kInteraction };

struct BruteForceResult {
  std::vector<double> marginal;  // per column
  Eigen::MatrixXd interaction;   // columns x columns, zero diagonal
};

inline constexpr std::size_t kBruteForceMaxFeatures = 12;

// Interventional Shapley values of `f` at `probe` over every column of
// `background`, by explicit subset enumeration with sample-mean
// expectations. Refuses more than kBruteForceMaxFeatures columns.
BruteForceResult BruteForceShapley(const PointFunction& f,
                                   const Dataset& background,
                                   std::span<const double> probe,
                                   ShapleyMode mode);

// --- Whole-model attributions ----------------------------------------------

// Precomputed per-rule unit attributions keyed by the probe's indicator
// pattern, plus the linear-term offsets. Slices are draws x probes.
class ShapleyEngine {
 public:
  ShapleyEngine(const FittedModel& model, const Dataset& background,
                const Dataset& probes);

  std::size_t probes() const { return n_probes_; }
  std::size_t columns() const { return model_.columns(); }
  std::size_t features() const { return model_.features.size(); }

  // Attribution of one data column.
  Eigen::MatrixXd ColumnSlice(std::size_t column, const Eigen::MatrixXd& a,
                              const Eigen::MatrixXd& b) const;
  // Attribution of one original feature (dummy columns summed).
  Eigen::MatrixXd FeatureSlice(std::size_t feature, const Eigen::MatrixXd& a,
                               const Eigen::MatrixXd& b) const;
  // Interaction between two data columns (j != j2); symmetric.
  Eigen::MatrixXd ColumnPairSlice(std::size_t j, std::size_t j2,
                                  const Eigen::MatrixXd& a) const;
  // Interaction between two original features. For f == f2 this is the sum
  // over distinct column pairs within the factor.
  Eigen::MatrixXd FeaturePairSlice(std::size_t f, std::size_t f2,
                                   const Eigen::MatrixXd& a) const;

  // Mean prediction over the background, per draw.
  Eigen::VectorXd Base(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) const;
  // Model prediction at every probe, per draw.
  Eigen::MatrixXd Predictions(const Eigen::MatrixXd& a,
                              const Eigen::MatrixXd& b) const;

  // Unit marginal attribution of rule k to its local column `local` at the
  // probe pattern `pattern`.
  double UnitMarginal(std::size_t k, unsigned pattern, std::size_t local) const;

 private:
  struct RuleTable {
    std::vector<std::size_t> involved;
    std::vector<std::uint16_t> probe_pattern;  // per probe
    std::vector<double> marginal;     // [pattern][local]
    std::vector<double> interaction;  // [pattern][pair], pairs (l1 < l2)
    double background_mean = 0.0;
  };

  std::vector<std::size_t> ColumnsOf(std::size_t feature) const;

  const FittedModel& model_;
  std::size_t n_probes_;
  std::vector<RuleTable> tables_;
  std::vector<std::vector<std::size_t>> rules_by_column_;
  // Per linear term j: (winsorize(x*) - background mean of winsorize) / scale.
  Eigen::MatrixXd linear_offsets_;  // p x probes
  Eigen::VectorXd linear_background_;  // background mean of z_j
  Eigen::MatrixXd centered_rules_;  // probes x q, r_k(x*) - rbar_k
};

// Materialized attributions for all draws, probes and original features.
struct ShapleyCube {
  std::vector<std::string> feature_names;
  std::vector<Eigen::MatrixXd> values;  // per feature: draws x probes
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // f <= f2
  std::vector<Eigen::MatrixXd> interactions;  // aligned with `pairs`
  Eigen::VectorXd base;         // per draw
  Eigen::MatrixXd predictions;  // draws x probes

  std::size_t draws() const { return static_cast<std::size_t>(base.size()); }
  std::size_t probes() const {
    return static_cast<std::size_t>(predictions.cols());
  }
};

// Feature pairs reported for interactions: every f < f2, plus (f, f) for
// categorical features with more than one column.
std::vector<std::pair<std::size_t, std::size_t>> InteractionPairs(
    const FittedModel& model);

ShapleyCube ModelShapley(const FittedModel& model, const Dataset& background,
                         const Dataset& probes, bool with_interactions = true);

}  // namespace ruleshap

#endif  // RULESHAP_SHAPLEY_H_
