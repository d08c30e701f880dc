#include "ruleshap/rulegen.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

#include "json.hpp"

#include "ruleshap/error.h"
#include "ruleshap/horseshoe.h"

namespace ruleshap {

namespace {

constexpr std::uint64_t kForestStream = 0x5f0e;
constexpr std::uint64_t kSyntheticStream = 0x5f0f;

}  // namespace

std::size_t SmoothingConfig::ResolvedMtry(std::size_t p) const {
  if (mtry != 0) return std::min(mtry, p);
  return std::max<std::size_t>(1, (p + 2) / 3);
}

std::size_t SmoothingConfig::MinLeaf(std::size_t n) const {
  const auto frac =
      static_cast<std::size_t>(std::ceil(min_leaf_fraction * static_cast<double>(n)));
  return std::max<std::size_t>({min_leaf_count, frac, 1});
}

void SmoothingConfig::Validate(std::size_t p) const {
  if (n_trees == 0) throw ValidationError("n_trees must be positive");
  if (p == 0) throw ValidationError("need at least one feature");
  if (mtry > p) throw ValidationError("mtry exceeds the number of columns");
  if (!(mu > 0.0) || !(eta > 0.0)) {
    throw ValidationError("mu and eta must be positive");
  }
  if (!(min_leaf_fraction >= 0.0 && min_leaf_fraction < 0.5)) {
    throw ValidationError("min_leaf_fraction must lie in [0, 0.5)");
  }
  if (max_depth == 0) throw ValidationError("max_depth must be positive");
}

// --- Trees -----------------------------------------------------------------

double Tree::Predict(const Dataset& x, std::size_t row) const {
  std::size_t node = 0;
  while (!nodes[node].leaf) {
    const TreeNode& n = nodes[node];
    node = x.at(row, n.feature) <= n.threshold ? n.left : n.right;
  }
  return nodes[node].value;
}

std::size_t Tree::Depth() const {
  std::size_t best = 0;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    const auto [node, depth] = stack.back();
    stack.pop_back();
    best = std::max(best, depth);
    if (!nodes[node].leaf) {
      stack.emplace_back(nodes[node].left, depth + 1);
      stack.emplace_back(nodes[node].right, depth + 1);
    }
  }
  return best;
}

namespace {

struct Split {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double gain = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& x, std::span<const double> targets,
              const SmoothingConfig& cfg, std::size_t min_leaf, Rng& rng)
      : x_(x), targets_(targets), cfg_(cfg), min_leaf_(min_leaf), rng_(rng),
        mtry_(cfg.ResolvedMtry(x.cols())) {}

  // `members` are positions into `targets` (and the matching row list).
  std::size_t Build(Tree& tree, std::span<const std::size_t> rows,
                    std::vector<std::size_t> members, std::size_t depth) {
    const std::size_t id = tree.nodes.size();
    tree.nodes.emplace_back();
    double sum = 0.0;
    for (std::size_t m : members) sum += targets_[m];
    tree.nodes[id].value = sum / static_cast<double>(members.size());
    tree.nodes[id].count = members.size();
    if (depth >= cfg_.max_depth || members.size() < 2 * min_leaf_) return id;

    const Split split = BestSplit(rows, members);
    if (!split.found) return id;

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (std::size_t m : members) {
      (x_.at(rows[m], split.feature) <= split.threshold ? left : right).push_back(m);
    }
    members.clear();
    members.shrink_to_fit();
    tree.nodes[id].leaf = false;
    tree.nodes[id].feature = split.feature;
    tree.nodes[id].threshold = split.threshold;
    const std::size_t l = Build(tree, rows, std::move(left), depth + 1);
    const std::size_t r = Build(tree, rows, std::move(right), depth + 1);
    tree.nodes[id].left = l;
    tree.nodes[id].right = r;
    return id;
  }

 private:
  Split BestSplit(std::span<const std::size_t> rows,
                  const std::vector<std::size_t>& members) {
    // Partial Fisher-Yates for mtry distinct candidate columns.
    std::vector<std::size_t> features(x_.cols());
    std::iota(features.begin(), features.end(), 0);
    for (std::size_t i = 0; i < mtry_; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, features.size() - 1);
      std::swap(features[i], features[pick(rng_)]);
    }
    features.resize(mtry_);

    const double count = static_cast<double>(members.size());
    double total = 0.0;
    for (std::size_t m : members) total += targets_[m];

    Split best;
    std::vector<std::pair<double, double>> sorted(members.size());
    for (std::size_t f : features) {
      for (std::size_t i = 0; i < members.size(); ++i) {
        sorted[i] = {x_.at(rows[members[i]], f), targets_[members[i]]};
      }
      std::sort(sorted.begin(), sorted.end());
      double left_sum = 0.0;
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        left_sum += sorted[i].second;
        const std::size_t nl = i + 1;
        const std::size_t nr = sorted.size() - nl;
        if (nl < min_leaf_) continue;
        if (nr < min_leaf_) break;
        if (sorted[i].first == sorted[i + 1].first) continue;
        const double right_sum = total - left_sum;
        // SSE reduction = sum_l^2/n_l + sum_r^2/n_r - total^2/n.
        const double gain = left_sum * left_sum / static_cast<double>(nl) +
                            right_sum * right_sum / static_cast<double>(nr) -
                            total * total / count;
        if (gain > best.gain) {
          best.found = true;
          best.gain = gain;
          best.feature = f;
          best.threshold = 0.5 * (sorted[i].first + sorted[i + 1].first);
        }
      }
    }
    // Reject splits that are only rounding noise.
    double scale = 0.0;
    for (std::size_t m : members) scale += targets_[m] * targets_[m];
    if (best.found && best.gain <= 1e-12 * std::max(scale, 1e-300)) {
      best.found = false;
    }
    return best;
  }

  const Dataset& x_;
  std::span<const double> targets_;
  const SmoothingConfig& cfg_;
  std::size_t min_leaf_;
  Rng& rng_;
  std::size_t mtry_;
};

}  // namespace

Tree FitTree(std::span<const std::size_t> rows, const Dataset& x,
             std::span<const double> targets, const SmoothingConfig& cfg,
             Rng& rng) {
  if (rows.empty()) throw ValidationError("cannot fit a tree on zero rows");
  if (targets.size() != rows.size()) {
    throw ValidationError("tree targets must align with rows");
  }
  for (double t : targets) {
    if (!std::isfinite(t)) throw ValidationError("tree targets must be finite");
  }
  Tree tree;
  tree.bootstrap_indices.assign(rows.begin(), rows.end());
  std::vector<std::size_t> members(rows.size());
  std::iota(members.begin(), members.end(), 0);
  TreeBuilder builder(x, targets, cfg, cfg.MinLeaf(rows.size()), rng);
  builder.Build(tree, rows, std::move(members), 0);
  return tree;
}

namespace {

std::vector<std::size_t> DrawBootstrap(std::size_t n, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> rows(n);
  for (auto& r : rows) r = pick(rng);
  return rows;
}

// Averages predictions of trees that did not see each row. `reference` gives
// the comparison value for oob_sigma2 and the fallback for uncovered rows.
void FillOutOfBag(Forest& forest, const Dataset& x,
                  const std::vector<double>& reference, double fallback) {
  const std::size_t n = x.rows();
  std::vector<double> sum(n, 0.0);
  std::vector<std::size_t> hits(n, 0);
  std::vector<char> in_bag(n);
  for (const Tree& tree : forest.trees) {
    std::fill(in_bag.begin(), in_bag.end(), 0);
    for (std::size_t r : tree.bootstrap_indices) in_bag[r] = 1;
    for (std::size_t i = 0; i < n; ++i) {
      if (in_bag[i]) continue;
      sum[i] += tree.Predict(x, i);
      ++hits[i];
    }
  }
  forest.oob_predictions.assign(n, fallback);
  forest.oob_fallback_rows = 0;
  double sse = 0.0;
  std::size_t covered = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (hits[i] == 0) {
      ++forest.oob_fallback_rows;
      continue;
    }
    forest.oob_predictions[i] = sum[i] / static_cast<double>(hits[i]);
    const double d = reference[i] - forest.oob_predictions[i];
    sse += d * d;
    ++covered;
  }
  forest.oob_sigma2 = covered > 0 ? sse / static_cast<double>(covered) : 0.0;
}

void CheckForestInput(const Dataset& x, std::size_t n_outcome,
                      const SmoothingConfig& cfg) {
  cfg.Validate(x.cols());
  if (n_outcome != x.rows()) {
    throw ValidationError("outcome length does not match the data");
  }
  if (x.rows() < 20) throw ValidationError("forest fitting needs n >= 20");
}

}  // namespace

Forest FitForest(const Dataset& x, OutcomeView y, const SmoothingConfig& cfg) {
  CheckForestInput(x, y.size(), cfg);
  const std::size_t n = x.rows();
  std::vector<double> observed(n);
  for (std::size_t i = 0; i < n; ++i) observed[i] = y[i];
  for (double v : observed) {
    if (!std::isfinite(v)) throw ValidationError("outcome must be finite");
  }

  Forest forest;
  forest.trees.reserve(cfg.n_trees);
  std::vector<double> targets(n);
  for (std::size_t t = 0; t < cfg.n_trees; ++t) {
    Rng rng = DeriveRng(cfg.seed, kForestStream, t);
    const auto rows = DrawBootstrap(n, rng);
    for (std::size_t i = 0; i < n; ++i) targets[i] = observed[rows[i]];
    forest.trees.push_back(FitTree(rows, x, targets, cfg, rng));
  }
  FillOutOfBag(forest, x, observed, Mean(observed));
  return forest;
}

Forest FitSyntheticForest(const Dataset& x, const SyntheticOutcomeModel& model,
                          const SmoothingConfig& cfg) {
  CheckForestInput(x, model.means.size(), cfg);
  if (!(model.sigma2 >= 0.0) || !std::isfinite(model.sigma2)) {
    throw ValidationError("synthetic variance must be finite and >= 0");
  }
  const std::size_t n = x.rows();
  const double sd = std::sqrt(model.sigma2);
  Forest forest;
  forest.trees.reserve(cfg.n_trees);
  std::vector<double> targets(n);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t t = 0; t < cfg.n_trees; ++t) {
    Rng rng = DeriveRng(cfg.seed, kSyntheticStream, t);
    const auto rows = DrawBootstrap(n, rng);
    for (std::size_t i = 0; i < n; ++i) {
      targets[i] = model.means[rows[i]] + sd * normal(rng);
    }
    forest.trees.push_back(FitTree(rows, x, targets, cfg, rng));
  }
  FillOutOfBag(forest, x, model.means, Mean(model.means));
  return forest;
}

Forest SmoothingForest(const Dataset& x, OutcomeView y,
                       const SmoothingConfig& cfg) {
  const Forest first = FitForest(x, y, cfg);
  SyntheticOutcomeModel model{first.oob_predictions, first.oob_sigma2};
  return FitSyntheticForest(x, model, cfg);
}

std::vector<double> Residualize(const Dataset& x, std::span<const double> y,
                                const Preprocessing& prep,
                                const GibbsConfig& gibbs) {
  const std::size_t n = x.rows();
  if (y.size() != n) throw ValidationError("outcome length does not match the data");
  const auto cols = prep.LinearColumns();
  const double y_mean = Mean(y);
  std::vector<double> residual(y.begin(), y.end());
  for (double& r : residual) r -= y_mean;
  if (cols.empty() || n < 2) return residual;

  DesignMatrices dm;
  dm.rules.resize(static_cast<Eigen::Index>(n), 0);
  dm.linear.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
  dm.y = Eigen::Map<const Eigen::VectorXd>(residual.data(), static_cast<Eigen::Index>(n));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      dm.linear(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          prep.Standardize(cols[c], x.at(i, cols[c]));
    }
  }
  dm.linear.rowwise() -= dm.linear.colwise().mean();
  const PosteriorDraws draws = GibbsFit(dm, gibbs);
  const Eigen::VectorXd fitted = dm.linear * PosteriorMeanB(draws);
  for (std::size_t i = 0; i < n; ++i) residual[i] -= fitted[static_cast<Eigen::Index>(i)];
  return residual;
}

// --- Rules -----------------------------------------------------------------

bool Rule::Evaluate(const Dataset& x, std::size_t row) const {
  for (const auto& c : conditions) {
    if (!c.Holds(x.at(row, c.feature))) return false;
  }
  return true;
}

bool Rule::Evaluate(std::span<const double> row) const {
  for (const auto& c : conditions) {
    if (!c.Holds(row[c.feature])) return false;
  }
  return true;
}

double RuleScale(double support, std::size_t depth, double mu, double eta) {
  if (!(support > 0.0 && support < 1.0) || depth == 0) {
    throw ValidationError("rule scale needs 0 < support < 1 and depth >= 1");
  }
  const double lo = std::min(support, 1.0 - support);
  const double hi = std::max(support, 1.0 - support);
  return std::pow(2.0 * lo, mu - 0.5) /
         (std::pow(static_cast<double>(depth), eta) * std::sqrt(2.0 * hi));
}

std::vector<FeatureCondition> MergePath(std::span<const PathStep> path) {
  std::map<std::size_t, FeatureCondition> merged;
  for (const PathStep& s : path) {
    auto [it, inserted] = merged.try_emplace(s.feature);
    it->second.feature = s.feature;
    if (s.less) {
      it->second.upper = std::min(it->second.upper, s.threshold);
    } else {
      it->second.lower = std::max(it->second.lower, s.threshold);
    }
  }
  std::vector<FeatureCondition> out;
  out.reserve(merged.size());
  for (auto& [f, c] : merged) out.push_back(c);
  return out;
}

std::vector<Rule> Disaggregate(std::span<const FeatureCondition> path) {
  const std::size_t m = path.size();
  if (m == 0 || m >= 16) throw ValidationError("path must hold 1..15 conditions");
  std::vector<unsigned> masks;
  for (unsigned mask = 1; mask < (1u << m); ++mask) masks.push_back(mask);
  // By subset size, then lexicographically by the positions taken.
  std::stable_sort(masks.begin(), masks.end(), [m](unsigned a, unsigned b) {
    const int pa = std::popcount(a);
    const int pb = std::popcount(b);
    if (pa != pb) return pa < pb;
    for (std::size_t i = 0; i < m; ++i) {
      const bool ia = (a >> i) & 1u;
      const bool ib = (b >> i) & 1u;
      if (ia != ib) return ia;
    }
    return false;
  });
  std::vector<Rule> rules;
  rules.reserve(masks.size());
  for (unsigned mask : masks) {
    Rule r;
    for (std::size_t i = 0; i < m; ++i) {
      if ((mask >> i) & 1u) r.conditions.push_back(path[i]);
    }
    rules.push_back(std::move(r));
  }
  return rules;
}

namespace {

double RoundThreshold(double t) { return std::round(t * 1000.0) / 1000.0; }

using RuleKey = std::vector<std::tuple<std::size_t, double, double>>;

RuleKey KeyOf(const Rule& r) {
  RuleKey key;
  key.reserve(r.conditions.size());
  for (const auto& c : r.conditions) key.emplace_back(c.feature, c.lower, c.upper);
  return key;
}

void CollectPaths(const Tree& tree, const Dataset& x, std::size_t node,
                  std::vector<PathStep>& path,
                  std::vector<std::vector<PathStep>>& out) {
  const TreeNode& n = tree.nodes[node];
  if (n.leaf) {
    if (!path.empty()) out.push_back(path);
    return;
  }
  const double t = x.column(n.feature).kind == ColumnKind::kContinuous
                       ? RoundThreshold(n.threshold)
                       : n.threshold;
  path.push_back({n.feature, t, true});
  CollectPaths(tree, x, n.left, path, out);
  path.back().less = false;
  CollectPaths(tree, x, n.right, path, out);
  path.pop_back();
}

}  // namespace

RuleSet ExtractRules(const Forest& forest, const Dataset& x,
                     const SmoothingConfig& cfg) {
  std::vector<Rule> distinct;
  std::set<RuleKey> seen;
  std::vector<std::vector<PathStep>> paths;
  std::vector<PathStep> path;
  for (const Tree& tree : forest.trees) {
    paths.clear();
    CollectPaths(tree, x, 0, path, paths);
    for (const auto& steps : paths) {
      const auto merged = MergePath(steps);
      for (Rule& r : Disaggregate(merged)) {
        if (seen.insert(KeyOf(r)).second) distinct.push_back(std::move(r));
      }
    }
  }

  RuleSet out;
  out.candidates = distinct.size();
  const std::size_t n = x.rows();
  for (Rule& r : distinct) {
    // Drop x >= c when x < c on the same column is also a candidate.
    if (r.depth() == 1 && r.conditions[0].HasLower() && !r.conditions[0].HasUpper()) {
      FeatureCondition mirror;
      mirror.feature = r.conditions[0].feature;
      mirror.upper = r.conditions[0].lower;
      Rule probe;
      probe.conditions = {mirror};
      if (seen.count(KeyOf(probe)) > 0) continue;
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) hits += r.Evaluate(x, i) ? 1 : 0;
    r.support = static_cast<double>(hits) / static_cast<double>(n);
    if (hits == 0 || hits == n || r.support < 0.025 || r.support > 0.975) continue;
    r.scale = RuleScale(r.support, r.depth(), cfg.mu, cfg.eta);
    out.rules.push_back(std::move(r));
  }
  return out;
}

// --- JSON lines --------------------------------------------------------------

std::string RuleToJson(const Rule& rule) {
  nlohmann::ordered_json conds = nlohmann::ordered_json::array();
  for (const auto& c : rule.conditions) {
    if (c.HasLower()) {
      conds.push_back({{"j", c.feature}, {"op", ">="}, {"c", c.lower}});
    }
    if (c.HasUpper()) {
      conds.push_back({{"j", c.feature}, {"op", "<"}, {"c", c.upper}});
    }
  }
  nlohmann::ordered_json j;
  j["conditions"] = std::move(conds);
  j["support"] = rule.support;
  j["depth"] = rule.depth();
  j["scale"] = rule.scale;
  return j.dump();
}

Rule RuleFromJson(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid rule JSON: ") + e.what());
  }
  try {
    std::map<std::size_t, FeatureCondition> by_feature;
    for (const auto& c : j.at("conditions")) {
      const auto f = c.at("j").get<std::size_t>();
      const auto op = c.at("op").get<std::string>();
      const auto v = c.at("c").get<double>();
      auto& cond = by_feature[f];
      cond.feature = f;
      if (op == "<") {
        cond.upper = v;
      } else if (op == ">=") {
        cond.lower = v;
      } else {
        throw ValidationError("unknown rule operator '" + op + "'");
      }
    }
    if (by_feature.empty()) throw ValidationError("rule has no conditions");
    Rule r;
    for (auto& [f, c] : by_feature) r.conditions.push_back(c);
    r.support = j.value("support", 0.0);
    r.scale = j.value("scale", 0.0);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed rule: ") + e.what());
  }
}

void WriteRules(const std::vector<Rule>& rules, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  for (const Rule& r : rules) out << RuleToJson(r) << '\n';
  if (!out) throw ValidationError("failed writing '" + path + "'");
}

std::vector<Rule> ReadRules(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::vector<Rule> rules;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    rules.push_back(RuleFromJson(line));
  }
  return rules;
}

}  // namespace ruleshap
