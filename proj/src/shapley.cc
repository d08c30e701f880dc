#include "ruleshap/shapley.h"

#include <algorithm>
#include <bit>
#include <cmath>

#include "ruleshap/error.h"

namespace ruleshap {

unsigned __int128 ExactBinomial(unsigned n, unsigned k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 r = 1;
  for (unsigned i = 1; i <= k; ++i) {
    // r * (n - k + i) is divisible by i: it is i * C(n - k + i, i).
    unsigned __int128 next;
    if (__builtin_mul_overflow(r, static_cast<unsigned __int128>(n - k + i), &next)) {
      throw NumericError("binomial coefficient overflows 128 bits");
    }
    r = next / i;
  }
  return r;
}

bool BinomSumIdentityCheck(unsigned a, unsigned b, unsigned c) {
  if (c > b) throw ValidationError("identity check needs 0 <= c <= b");
  unsigned __int128 lhs = 0;
  for (unsigned u = 0; u <= c; ++u) {
    unsigned __int128 term;
    if (__builtin_mul_overflow(ExactBinomial(a + u, u),
                               ExactBinomial(b - u, c - u), &term) ||
        __builtin_add_overflow(lhs, term, &lhs)) {
      throw NumericError("identity sum overflows 128 bits");
    }
  }
  return lhs == ExactBinomial(a + b + 1, c);
}

namespace {

// Binomials with both arguments below 64, as doubles. The closed-form
// kernels only reach arguments up to twice the rule depth.
class BinomialTable {
 public:
  BinomialTable() {
    for (unsigned n = 0; n < kSize; ++n) {
      for (unsigned k = 0; k < kSize; ++k) {
        table_[n][k] = static_cast<double>(ExactBinomial(n, k));
      }
    }
  }
  double operator()(int n, int k) const {
    if (n < 0 || k < 0 || n >= static_cast<int>(kSize) || k > n) {
      throw NumericError("binomial argument out of table range");
    }
    return table_[n][k];
  }

 private:
  static constexpr unsigned kSize = 64;
  double table_[kSize][kSize];
};

const BinomialTable& Binomials() {
  static const BinomialTable table;
  return table;
}

// Single-row summand of the marginal estimator for local column `l`.
// `rs`, `rt` are the probe's and the row's indicators; zero when the row
// does not qualify or the indicator agrees with the probe's.
inline double MarginalTerm(int m, int qs, int qt, int rs_l, int rt_l) {
  if (rs_l == rt_l) return 0.0;
  const int top = 2 * m - qs - qt - 1 + rs_l + rt_l;
  const int bottom = m - qs + rs_l;
  return static_cast<double>(rs_l - rt_l) / Binomials()(top, bottom);
}

inline double MarginalPrefactor(std::size_t n, int m, int qs, int rs_l) {
  return 1.0 / (static_cast<double>(n) * static_cast<double>(m - qs + rs_l));
}

inline double InteractionTerm(int m, int qs, int qt, int rs_a, int rs_b,
                              int rt_a, int rt_b) {
  const int num = (rs_a - rt_a) * (rs_b - rt_b);
  if (num == 0) return 0.0;
  const int top = 2 * m - qs - qt - 3 + rs_a + rs_b + rt_a + rt_b;
  const int bottom = m - 1 - qs + rs_a + rs_b;
  return static_cast<double>(num) / Binomials()(top, bottom);
}

inline double InteractionPrefactor(std::size_t n, int m, int qs, int rs_a,
                                   int rs_b) {
  return 1.0 /
         (static_cast<double>(n) * static_cast<double>(m - 1 - qs + rs_a + rs_b));
}

std::vector<int> ProbeIndicators(const Rule& rule, std::span<const double> probe) {
  std::vector<int> r;
  r.reserve(rule.conditions.size());
  for (const auto& c : rule.conditions) {
    if (c.feature >= probe.size()) {
      throw ValidationError("probe is shorter than the rule's columns");
    }
    r.push_back(c.Holds(probe[c.feature]) ? 1 : 0);
  }
  return r;
}

bool Qualifies(const ReducedRuleView& view, std::size_t t,
               const std::vector<int>& rs) {
  for (std::size_t k = 0; k < view.p_r(); ++k) {
    if (!view.at(t, k) && !rs[k]) return false;
  }
  return true;
}

void CheckRuleColumns(const Rule& rule, const Dataset& data) {
  if (rule.conditions.empty()) throw ValidationError("rule has no conditions");
  for (std::size_t k = 0; k < rule.conditions.size(); ++k) {
    if (rule.conditions[k].feature >= data.cols()) {
      throw ValidationError("rule refers to a column outside the data");
    }
    if (k > 0 && rule.conditions[k].feature <= rule.conditions[k - 1].feature) {
      throw ValidationError("rule conditions must be on distinct ascending columns");
    }
  }
}

constexpr std::size_t kMaxPatternDepth = 12;

unsigned PatternOf(const Rule& rule, const Dataset& data, std::size_t row) {
  unsigned pattern = 0;
  for (std::size_t l = 0; l < rule.conditions.size(); ++l) {
    const auto& c = rule.conditions[l];
    const double x = data.at(row, c.feature);
    pattern |= static_cast<unsigned>((x >= c.lower) & (x < c.upper)) << l;
  }
  return pattern;
}

// Row counts per indicator pattern; bit l is condition l.
std::vector<std::size_t> PatternHistogram(const Rule& rule, const Dataset& data) {
  std::vector<std::size_t> hist(std::size_t{1} << rule.depth(), 0);
  for (std::size_t t = 0; t < data.rows(); ++t) ++hist[PatternOf(rule, data, t)];
  return hist;
}

// Column bookkeeping of a reduced view without the per-row indicators.
ReducedRuleView InvolvedOnly(const Rule& rule, const Dataset& data) {
  CheckRuleColumns(rule, data);
  ReducedRuleView view;
  view.rows = data.rows();
  for (const auto& c : rule.conditions) view.involved.push_back(c.feature);
  return view;
}

unsigned PatternOf(const std::vector<int>& indicators) {
  unsigned pattern = 0;
  for (std::size_t l = 0; l < indicators.size(); ++l) {
    pattern |= static_cast<unsigned>(indicators[l]) << l;
  }
  return pattern;
}

}  // namespace

ReducedRuleView ReduceRule(const Rule& rule, const Dataset& data) {
  CheckRuleColumns(rule, data);
  ReducedRuleView view;
  view.rows = data.rows();
  const std::size_t m = rule.conditions.size();
  for (const auto& c : rule.conditions) view.involved.push_back(c.feature);
  view.indicators.resize(view.rows * m);
  view.satisfied.assign(view.rows, 0);
  for (std::size_t t = 0; t < view.rows; ++t) {
    for (std::size_t k = 0; k < m; ++k) {
      const auto& c = rule.conditions[k];
      const std::uint8_t hit = c.Holds(data.at(t, c.feature)) ? 1 : 0;
      view.indicators[t * m + k] = hit;
      view.satisfied[t] += hit;
    }
  }
  return view;
}

std::vector<double> RuleShapley(const Rule& rule, double coeff,
                                const Dataset& data,
                                std::span<const double> probe) {
  CheckRuleColumns(rule, data);
  const auto rs = ProbeIndicators(rule, probe);
  const std::size_t depth = rule.depth();
  const int m = static_cast<int>(depth);
  int qs = 0;
  for (int r : rs) qs += r;

  std::vector<double> acc(depth, 0.0);
  if (depth <= kMaxPatternDepth) {
    const auto hist = PatternHistogram(rule, data);
    const unsigned full = (1u << depth) - 1u;
    const unsigned pi = PatternOf(rs);
    for (unsigned tau = 0; tau <= full; ++tau) {
      if (hist[tau] == 0 || (pi | tau) != full) continue;
      const double weight = static_cast<double>(hist[tau]);
      const int qt = std::popcount(tau);
      for (std::size_t k = 0; k < depth; ++k) {
        acc[k] += weight * MarginalTerm(m, qs, qt, rs[k], (tau >> k) & 1u);
      }
    }
  } else {
    const ReducedRuleView view = ReduceRule(rule, data);
    for (std::size_t t = 0; t < view.rows; ++t) {
      if (!Qualifies(view, t, rs)) continue;
      for (std::size_t k = 0; k < depth; ++k) {
        acc[k] += MarginalTerm(m, qs, view.satisfied[t], rs[k], view.at(t, k));
      }
    }
  }
  std::vector<double> phi(data.cols(), 0.0);
  for (std::size_t k = 0; k < depth; ++k) {
    phi[rule.conditions[k].feature] =
        coeff * (acc[k] * MarginalPrefactor(data.rows(), m, qs, rs[k]));
  }
  return phi;
}

double RuleInteractionShapley(const Rule& rule, double coeff,
                              const Dataset& data,
                              std::span<const double> probe, std::size_t j,
                              std::size_t j2) {
  if (j == j2) throw ValidationError("interaction needs two distinct columns");
  const ReducedRuleView view =
      rule.depth() <= kMaxPatternDepth ? InvolvedOnly(rule, data) : ReduceRule(rule, data);
  const auto la = std::find(view.involved.begin(), view.involved.end(), j);
  const auto lb = std::find(view.involved.begin(), view.involved.end(), j2);
  if (la == view.involved.end() || lb == view.involved.end()) return 0.0;
  const auto a = static_cast<std::size_t>(la - view.involved.begin());
  const auto b = static_cast<std::size_t>(lb - view.involved.begin());
  const auto rs = ProbeIndicators(rule, probe);
  const int m = static_cast<int>(view.p_r());
  int qs = 0;
  for (int r : rs) qs += r;

  double acc = 0.0;
  if (view.p_r() <= kMaxPatternDepth) {
    const auto hist = PatternHistogram(rule, data);
    const unsigned full = (1u << view.p_r()) - 1u;
    const unsigned pi = PatternOf(rs);
    for (unsigned tau = 0; tau <= full; ++tau) {
      if (hist[tau] == 0 || (pi | tau) != full) continue;
      acc += static_cast<double>(hist[tau]) *
             InteractionTerm(m, qs, std::popcount(tau), rs[a], rs[b], (tau >> a) & 1u,
                             (tau >> b) & 1u);
    }
  } else {
    for (std::size_t t = 0; t < view.rows; ++t) {
      if (!Qualifies(view, t, rs)) continue;
      acc += InteractionTerm(m, qs, view.satisfied[t], rs[a], rs[b], view.at(t, a),
                             view.at(t, b));
    }
  }
  return coeff * (acc * InteractionPrefactor(view.rows, m, qs, rs[a], rs[b]));
}

// --- Enumeration oracle ----------------------------------------------------

BruteForceResult BruteForceShapley(const PointFunction& f,
                                   const Dataset& background,
                                   std::span<const double> probe,
                                   ShapleyMode mode) {
  const std::size_t p = background.cols();
  if (p > kBruteForceMaxFeatures) {
    throw ValidationError("brute-force enumeration refused: " +
                          std::to_string(p) + " features exceed the limit of " +
                          std::to_string(kBruteForceMaxFeatures));
  }
  if (probe.size() != p) throw ValidationError("probe length does not match data");
  const std::size_t n = background.rows();

  // v(S) = mean_t f(t with the S coordinates set to the probe's).
  const std::size_t subsets = std::size_t{1} << p;
  std::vector<double> value(subsets, 0.0);
  std::vector<double> point(p);
  for (std::size_t s = 0; s < subsets; ++s) {
    double sum = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      for (std::size_t j = 0; j < p; ++j) {
        point[j] = ((s >> j) & 1u) ? probe[j] : background.at(t, j);
      }
      sum += f(point);
    }
    value[s] = sum / static_cast<double>(n);
  }

  BruteForceResult out;
  out.marginal.assign(p, 0.0);
  out.interaction = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p),
                                          static_cast<Eigen::Index>(p));
  for (std::size_t j = 0; j < p; ++j) {
    const std::size_t bit = std::size_t{1} << j;
    double phi = 0.0;
    for (std::size_t s = 0; s < subsets; ++s) {
      if (s & bit) continue;
      const auto size = static_cast<unsigned>(std::popcount(s));
      const double w = 1.0 / (static_cast<double>(p) *
                              static_cast<double>(ExactBinomial(
                                  static_cast<unsigned>(p - 1), size)));
      phi += w * (value[s | bit] - value[s]);
    }
    out.marginal[j] = phi;
  }
  if (mode == ShapleyMode::kInteraction && p >= 2) {
    for (std::size_t j = 0; j < p; ++j) {
      for (std::size_t j2 = j + 1; j2 < p; ++j2) {
        const std::size_t bj = std::size_t{1} << j;
        const std::size_t bk = std::size_t{1} << j2;
        double phi = 0.0;
        for (std::size_t s = 0; s < subsets; ++s) {
          if (s & (bj | bk)) continue;
          const auto size = static_cast<unsigned>(std::popcount(s));
          const double w = 1.0 / (static_cast<double>(p - 1) *
                                  static_cast<double>(ExactBinomial(
                                      static_cast<unsigned>(p - 2), size)));
          phi += w * (value[s | bj | bk] - value[s | bj] - value[s | bk] + value[s]);
        }
        out.interaction(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j2)) = phi;
        out.interaction(static_cast<Eigen::Index>(j2), static_cast<Eigen::Index>(j)) = phi;
      }
    }
  }
  return out;
}

// --- Engine ----------------------------------------------------------------

namespace {

std::size_t PairIndex(std::size_t l1, std::size_t l2, std::size_t m) {
  // Row-major index into the strict upper triangle, l1 < l2.
  return l1 * m - l1 * (l1 + 1) / 2 + (l2 - l1 - 1);
}

}  // namespace

ShapleyEngine::ShapleyEngine(const FittedModel& model, const Dataset& background,
                             const Dataset& probes)
    : model_(model), n_probes_(probes.rows()) {
  model.CheckSchema(background);
  model.CheckSchema(probes);
  const std::size_t n_bg = background.rows();
  rules_by_column_.resize(model.columns());

  tables_.resize(model.q());
  for (std::size_t k = 0; k < model.q(); ++k) {
    const Rule& rule = model.rules[k];
    CheckRuleColumns(rule, background);
    const std::size_t m = rule.depth();
    if (m > kMaxPatternDepth) throw ValidationError("rule depth exceeds 12");
    RuleTable& tab = tables_[k];
    for (const auto& c : rule.conditions) {
      tab.involved.push_back(c.feature);
      rules_by_column_[c.feature].push_back(k);
    }
    const unsigned full = (1u << m) - 1u;
    std::vector<std::size_t> hist(std::size_t{1} << m, 0);
    for (std::size_t t = 0; t < n_bg; ++t) ++hist[PatternOf(rule, background, t)];
    tab.background_mean =
        static_cast<double>(hist[full]) / static_cast<double>(n_bg);

    const int mi = static_cast<int>(m);
    const std::size_t n_pairs = m * (m - 1) / 2;
    tab.marginal.assign((std::size_t{1} << m) * m, 0.0);
    tab.interaction.assign((std::size_t{1} << m) * n_pairs, 0.0);
    for (unsigned pi = 0; pi <= full; ++pi) {
      const int qs = std::popcount(pi);
      std::vector<double> acc(m, 0.0);
      std::vector<double> acc2(n_pairs, 0.0);
      for (unsigned tau = 0; tau <= full; ++tau) {
        if (hist[tau] == 0 || (pi | tau) != full) continue;
        const double weight = static_cast<double>(hist[tau]);
        const int qt = std::popcount(tau);
        for (std::size_t l = 0; l < m; ++l) {
          acc[l] += weight * MarginalTerm(mi, qs, qt, (pi >> l) & 1u, (tau >> l) & 1u);
        }
        for (std::size_t l1 = 0; l1 < m; ++l1) {
          for (std::size_t l2 = l1 + 1; l2 < m; ++l2) {
            acc2[PairIndex(l1, l2, m)] +=
                weight * InteractionTerm(mi, qs, qt, (pi >> l1) & 1u,
                                         (pi >> l2) & 1u, (tau >> l1) & 1u,
                                         (tau >> l2) & 1u);
          }
        }
      }
      for (std::size_t l = 0; l < m; ++l) {
        tab.marginal[pi * m + l] =
            acc[l] * MarginalPrefactor(n_bg, mi, qs, (pi >> l) & 1u);
      }
      for (std::size_t l1 = 0; l1 < m; ++l1) {
        for (std::size_t l2 = l1 + 1; l2 < m; ++l2) {
          tab.interaction[pi * n_pairs + PairIndex(l1, l2, m)] =
              acc2[PairIndex(l1, l2, m)] *
              InteractionPrefactor(n_bg, mi, qs, (pi >> l1) & 1u, (pi >> l2) & 1u);
        }
      }
    }
    tab.probe_pattern.resize(n_probes_);
    for (std::size_t i = 0; i < n_probes_; ++i) {
      tab.probe_pattern[i] = static_cast<std::uint16_t>(PatternOf(rule, probes, i));
    }
  }

  centered_rules_.resize(static_cast<Eigen::Index>(n_probes_),
                         static_cast<Eigen::Index>(model.q()));
  for (std::size_t k = 0; k < model.q(); ++k) {
    const unsigned full = (1u << model.rules[k].depth()) - 1u;
    for (std::size_t i = 0; i < n_probes_; ++i) {
      centered_rules_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          (tables_[k].probe_pattern[i] == full ? 1.0 : 0.0) - model.rules[k].support;
    }
  }

  const auto p = static_cast<Eigen::Index>(model.p());
  linear_offsets_.resize(p, static_cast<Eigen::Index>(n_probes_));
  linear_background_.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const std::size_t col = model.linear_columns[static_cast<std::size_t>(j)];
    double mean = 0.0;
    for (std::size_t t = 0; t < n_bg; ++t) {
      mean += model.prep.Standardize(col, background.at(t, col));
    }
    mean /= static_cast<double>(n_bg);
    linear_background_[j] = mean;
    for (std::size_t i = 0; i < n_probes_; ++i) {
      linear_offsets_(j, static_cast<Eigen::Index>(i)) =
          model.prep.Standardize(col, probes.at(i, col)) - mean;
    }
  }
}

double ShapleyEngine::UnitMarginal(std::size_t k, unsigned pattern,
                                   std::size_t local) const {
  const RuleTable& tab = tables_.at(k);
  return tab.marginal.at(pattern * tab.involved.size() + local);
}

std::vector<std::size_t> ShapleyEngine::ColumnsOf(std::size_t feature) const {
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < model_.columns(); ++c) {
    if (model_.column_feature[c] == feature) cols.push_back(c);
  }
  return cols;
}

Eigen::MatrixXd ShapleyEngine::ColumnSlice(std::size_t column,
                                           const Eigen::MatrixXd& a,
                                           const Eigen::MatrixXd& b) const {
  if (column >= columns()) throw ValidationError("column index out of range");
  const Eigen::Index draws = a.rows();
  const auto n = static_cast<Eigen::Index>(n_probes_);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(draws, n);

  const auto& ks = rules_by_column_[column];
  if (!ks.empty()) {
    const auto qg = static_cast<Eigen::Index>(ks.size());
    Eigen::MatrixXd a_sub(draws, qg);
    Eigen::MatrixXd unit(qg, n);
    for (Eigen::Index r = 0; r < qg; ++r) {
      const std::size_t k = ks[static_cast<std::size_t>(r)];
      a_sub.col(r) = a.col(static_cast<Eigen::Index>(k));
      const RuleTable& tab = tables_[k];
      const std::size_t m = tab.involved.size();
      const auto local = static_cast<std::size_t>(
          std::find(tab.involved.begin(), tab.involved.end(), column) -
          tab.involved.begin());
      for (Eigen::Index i = 0; i < n; ++i) {
        unit(r, i) = tab.marginal[tab.probe_pattern[static_cast<std::size_t>(i)] * m + local];
      }
    }
    out.noalias() += a_sub * unit;
  }
  const auto it = std::find(model_.linear_columns.begin(),
                            model_.linear_columns.end(), column);
  if (it != model_.linear_columns.end()) {
    const auto j = static_cast<Eigen::Index>(it - model_.linear_columns.begin());
    out.noalias() += b.col(j) * linear_offsets_.row(j);
  }
  return out;
}

Eigen::MatrixXd ShapleyEngine::FeatureSlice(std::size_t feature,
                                            const Eigen::MatrixXd& a,
                                            const Eigen::MatrixXd& b) const {
  Eigen::MatrixXd out =
      Eigen::MatrixXd::Zero(a.rows(), static_cast<Eigen::Index>(n_probes_));
  for (std::size_t c : ColumnsOf(feature)) out += ColumnSlice(c, a, b);
  return out;
}

Eigen::MatrixXd ShapleyEngine::ColumnPairSlice(std::size_t j, std::size_t j2,
                                               const Eigen::MatrixXd& a) const {
  if (j == j2) throw ValidationError("interaction needs two distinct columns");
  if (j > j2) std::swap(j, j2);
  const Eigen::Index draws = a.rows();
  const auto n = static_cast<Eigen::Index>(n_probes_);
  std::vector<std::size_t> ks;
  for (std::size_t k : rules_by_column_[j]) {
    const auto& inv = tables_[k].involved;
    if (std::find(inv.begin(), inv.end(), j2) != inv.end()) ks.push_back(k);
  }
  if (ks.empty()) return Eigen::MatrixXd::Zero(draws, n);
  const auto qg = static_cast<Eigen::Index>(ks.size());
  Eigen::MatrixXd a_sub(draws, qg);
  Eigen::MatrixXd unit(qg, n);
  for (Eigen::Index r = 0; r < qg; ++r) {
    const std::size_t k = ks[static_cast<std::size_t>(r)];
    a_sub.col(r) = a.col(static_cast<Eigen::Index>(k));
    const RuleTable& tab = tables_[k];
    const std::size_t m = tab.involved.size();
    const std::size_t n_pairs = m * (m - 1) / 2;
    const auto l1 = static_cast<std::size_t>(
        std::find(tab.involved.begin(), tab.involved.end(), j) - tab.involved.begin());
    const auto l2 = static_cast<std::size_t>(
        std::find(tab.involved.begin(), tab.involved.end(), j2) - tab.involved.begin());
    const std::size_t pair = PairIndex(l1, l2, m);
    for (Eigen::Index i = 0; i < n; ++i) {
      unit(r, i) =
          tab.interaction[tab.probe_pattern[static_cast<std::size_t>(i)] * n_pairs + pair];
    }
  }
  return a_sub * unit;
}

Eigen::MatrixXd ShapleyEngine::FeaturePairSlice(std::size_t f, std::size_t f2,
                                                const Eigen::MatrixXd& a) const {
  Eigen::MatrixXd out =
      Eigen::MatrixXd::Zero(a.rows(), static_cast<Eigen::Index>(n_probes_));
  const auto cols = ColumnsOf(f);
  if (f == f2) {
    for (std::size_t x = 0; x < cols.size(); ++x) {
      for (std::size_t y = x + 1; y < cols.size(); ++y) {
        out += ColumnPairSlice(cols[x], cols[y], a);
      }
    }
    return out;
  }
  const auto cols2 = ColumnsOf(f2);
  for (std::size_t c : cols) {
    for (std::size_t c2 : cols2) out += ColumnPairSlice(c, c2, a);
  }
  return out;
}

Eigen::VectorXd ShapleyEngine::Base(const Eigen::MatrixXd& a,
                                    const Eigen::MatrixXd& b) const {
  Eigen::VectorXd base = Eigen::VectorXd::Constant(a.rows(), model_.intercept);
  if (model_.q() > 0) {
    Eigen::VectorXd shift(static_cast<Eigen::Index>(model_.q()));
    for (std::size_t k = 0; k < model_.q(); ++k) {
      shift[static_cast<Eigen::Index>(k)] =
          tables_[k].background_mean - model_.rules[k].support;
    }
    base.noalias() += a * shift;
  }
  if (model_.p() > 0) base.noalias() += b * linear_background_;
  return base;
}

Eigen::MatrixXd ShapleyEngine::Predictions(const Eigen::MatrixXd& a,
                                           const Eigen::MatrixXd& b) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Constant(
      a.rows(), static_cast<Eigen::Index>(n_probes_), model_.intercept);
  if (model_.q() > 0) out.noalias() += a * centered_rules_.transpose();
  if (model_.p() > 0) {
    Eigen::MatrixXd z = linear_offsets_;
    z.colwise() += linear_background_;
    out.noalias() += b * z;
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> InteractionPairs(
    const FittedModel& model) {
  std::vector<std::size_t> width(model.features.size(), 0);
  for (std::size_t f : model.column_feature) ++width[f];
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t f = 0; f < model.features.size(); ++f) {
    if (model.features[f].categorical && width[f] > 1) pairs.emplace_back(f, f);
    for (std::size_t f2 = f + 1; f2 < model.features.size(); ++f2) {
      pairs.emplace_back(f, f2);
    }
  }
  return pairs;
}

ShapleyCube ModelShapley(const FittedModel& model, const Dataset& background,
                         const Dataset& probes, bool with_interactions) {
  if (model.draws.retained() == 0) {
    throw ValidationError("model has no posterior draws");
  }
  const ShapleyEngine engine(model, background, probes);
  const Eigen::MatrixXd& a = model.draws.a;
  const Eigen::MatrixXd& b = model.draws.b;
  ShapleyCube cube;
  for (std::size_t f = 0; f < engine.features(); ++f) {
    cube.feature_names.push_back(model.features[f].name);
    cube.values.push_back(engine.FeatureSlice(f, a, b));
  }
  if (with_interactions) {
    cube.pairs = InteractionPairs(model);
    for (const auto& [f, f2] : cube.pairs) {
      cube.interactions.push_back(engine.FeaturePairSlice(f, f2, a));
    }
  }
  cube.base = engine.Base(a, b);
  cube.predictions = engine.Predictions(a, b);
  return cube;
}

}  // namespace ruleshap
