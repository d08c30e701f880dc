#ifndef RULESHAP_RULEGEN_H_
#define RULESHAP_RULEGEN_H_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ruleshap/dataset.h"
#include "ruleshap/stats.h"

namespace ruleshap {

struct GibbsConfig;

// --- Trees -----------------------------------------------------------------

struct SmoothingConfig {
  std::size_t n_trees = 500;
  std::size_t mtry = 0;  // 0 selects ceil(p / 3)
  double mu = 1.0;
  double eta = 2.0;
  std::uint64_t seed = 1;
  double min_leaf_fraction = 0.025;
  std::size_t min_leaf_count = 10;
  std::size_t max_depth = 3;

  std::size_t ResolvedMtry(std::size_t p) const;
  // Leaf-size floor for a node fitted on `n` rows: max(count, ceil(frac * n)).
  std::size_t MinLeaf(std::size_t n) const;
  void Validate(std::size_t p) const;
};

struct TreeNode {
  bool leaf = true;
  std::size_t feature = 0;
  double threshold = 0.0;  // left child holds x <= threshold
  std::size_t left = 0;
  std::size_t right = 0;
  double value = 0.0;
  std::size_t count = 0;  // training rows (with bootstrap multiplicity)
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::vector<std::size_t> bootstrap_indices;

  double Predict(const Dataset& x, std::size_t row) const;
  std::size_t Depth() const;
};

// Greedy CART regression tree. `targets[i]` is the outcome of row `rows[i]`.
Tree FitTree(std::span<const std::size_t> rows, const Dataset& x,
             std::span<const double> targets, const SmoothingConfig& cfg,
             Rng& rng);

// Outcome accessor with an optional read counter (for auditing which stages
// touch the observed outcome).
class OutcomeView {
 public:
  explicit OutcomeView(std::span<const double> values,
                       std::size_t* read_counter = nullptr)
      : values_(values), reads_(read_counter) {}
  double operator[](std::size_t i) const {
    if (reads_ != nullptr) ++*reads_;
    return values_[i];
  }
  std::size_t size() const { return values_.size(); }

 private:
  std::span<const double> values_;
  std::size_t* reads_;
};

struct Forest {
  std::vector<Tree> trees;
  std::vector<double> oob_predictions;
  double oob_sigma2 = 0.0;
  std::size_t oob_fallback_rows = 0;  // rows never out-of-bag
};

// Plain random forest on bootstrap samples with out-of-bag predictions.
Forest FitForest(const Dataset& x, OutcomeView y, const SmoothingConfig& cfg);

// Normal outcome model estimated from a first forest's OOB predictions.
struct SyntheticOutcomeModel {
  std::vector<double> means;
  double sigma2 = 0.0;
};

// Forest where every bootstrap occurrence of row i receives a fresh draw from
// Normal(means[i], sigma2). Never sees the observed outcome.
Forest FitSyntheticForest(const Dataset& x, const SyntheticOutcomeModel& model,
                          const SmoothingConfig& cfg);

// Three-step smoothing forest: fit, estimate (oob mean, sigma2), refit on
// synthetic outcomes.
Forest SmoothingForest(const Dataset& x, OutcomeView y,
                       const SmoothingConfig& cfg);

// y minus the posterior-mean prediction of a linear-only horseshoe fit.
std::vector<double> Residualize(const Dataset& x, std::span<const double> y,
                                const Preprocessing& prep,
                                const GibbsConfig& gibbs);

// --- Rules -----------------------------------------------------------------

// lower <= x < upper on one feature; infinite bounds are absent.
struct FeatureCondition {
  std::size_t feature = 0;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();

  bool Holds(double x) const { return x >= lower && x < upper; }
  bool HasLower() const { return std::isfinite(lower); }
  bool HasUpper() const { return std::isfinite(upper); }
  bool operator==(const FeatureCondition&) const = default;
};

// One split taken along a tree path.
struct PathStep {
  std::size_t feature = 0;
  double threshold = 0.0;
  bool less = true;  // true: x < threshold, false: x >= threshold
};

struct Rule {
  std::vector<FeatureCondition> conditions;  // sorted by feature, distinct
  double support = 0.0;
  double scale = 0.0;

  std::size_t depth() const { return conditions.size(); }
  bool Evaluate(const Dataset& x, std::size_t row) const;
  bool Evaluate(std::span<const double> row) const;
  bool operator==(const Rule& o) const { return conditions == o.conditions; }
};

// Structured shrinkage scale
//   (2 min(r, 1-r))^(mu-0.5) / (m^eta sqrt(2 max(r, 1-r))).
double RuleScale(double support, std::size_t depth, double mu, double eta);

// Merges repeated features into interval conditions, sorted by feature.
std::vector<FeatureCondition> MergePath(std::span<const PathStep> path);

// All 2^m - 1 non-empty subsets of a merged path, by size then position.
std::vector<Rule> Disaggregate(std::span<const FeatureCondition> path);

struct RuleSet {
  std::vector<Rule> rules;
  std::size_t candidates = 0;  // distinct rules before complement/support filtering
  bool empty() const { return rules.empty(); }
};

// Collects root-to-leaf paths, disaggregates, rounds continuous thresholds to
// three decimals, dedups, drops complements and extreme-support rules, and
// assigns scales.
RuleSet ExtractRules(const Forest& forest, const Dataset& x,
                     const SmoothingConfig& cfg);

// JSON-lines rule exchange.
std::string RuleToJson(const Rule& rule);
Rule RuleFromJson(const std::string& line);
void WriteRules(const std::vector<Rule>& rules, const std::string& path);
std::vector<Rule> ReadRules(const std::string& path);

}  // namespace ruleshap

#endif  // RULESHAP_RULEGEN_H_
