#include "ruleshap/inference.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ruleshap/error.h"
#include "ruleshap/stats.h"

namespace ruleshap {

void CheckAlpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ValidationError("alpha must lie in (0, 1)");
  }
}

CellSummary SummarizeCell(std::span<const double> draws, double alpha) {
  const IntervalSummary s = Summarize(draws, alpha);
  return {s.mean, s.sd, s.lower, s.upper, s.lower > 0.0 || s.upper < 0.0};
}

std::vector<CellSummary> SummarizeSlice(const Eigen::MatrixXd& slice,
                                        double alpha) {
  std::vector<CellSummary> out;
  out.reserve(static_cast<std::size_t>(slice.cols()));
  std::vector<double> col(static_cast<std::size_t>(slice.rows()));
  for (Eigen::Index i = 0; i < slice.cols(); ++i) {
    Eigen::Map<Eigen::VectorXd>(col.data(), slice.rows()) = slice.col(i);
    out.push_back(SummarizeCell(col, alpha));
  }
  return out;
}

void EffectReport::AddFeature(const std::string& name,
                              const Eigen::MatrixXd& slice) {
  if (static_cast<std::size_t>(slice.rows()) < kMinDrawsForQuantiles &&
      warnings.empty()) {
    warnings.push_back("only " + std::to_string(slice.rows()) +
                       " draws; interval endpoints are unreliable below " +
                       std::to_string(kMinDrawsForQuantiles));
  }
  AddFeature(name, SummarizeSlice(slice, alpha));
}

void EffectReport::AddFeature(const std::string& name,
                              std::vector<CellSummary> feature_cells) {
  if (!features.empty() && feature_cells.size() != rows) {
    throw ValidationError("feature '" + name + "' has a different row count");
  }
  rows = feature_cells.size();
  std::size_t hits = 0;
  for (const auto& c : feature_cells) hits += c.significant ? 1 : 0;
  features.push_back(name);
  rejection_rate.push_back(rows == 0 ? 0.0
                                     : static_cast<double>(hits) /
                                           static_cast<double>(rows));
  cells.push_back(std::move(feature_cells));
}

EffectReport MakeEffectReport(const ShapleyCube& cube, double alpha) {
  EffectReport report(alpha);
  for (std::size_t f = 0; f < cube.values.size(); ++f) {
    report.AddFeature(cube.feature_names[f], cube.values[f]);
  }
  return report;
}

std::vector<GroupRate> RejectionRates(
    const EffectReport& report,
    const std::map<std::string, std::string>& grouping) {
  std::vector<GroupRate> out;
  for (std::size_t f = 0; f < report.features.size(); ++f) {
    const auto it = grouping.find(report.features[f]);
    if (it == grouping.end()) {
      throw ValidationError("grouping does not cover feature '" +
                            report.features[f] + "'");
    }
    auto g = std::find_if(out.begin(), out.end(),
                          [&](const GroupRate& r) { return r.group == it->second; });
    if (g == out.end()) {
      out.push_back({it->second, 0.0, 0});
      g = out.end() - 1;
    }
    g->rate += report.rejection_rate[f];
    ++g->features;
  }
  for (auto& g : out) g.rate /= static_cast<double>(g.features);
  return out;
}

InteractionReport::InteractionReport(std::vector<std::string> names,
                                     std::size_t n_rows, double a)
    : alpha(a), rows(n_rows), features(std::move(names)) {
  CheckAlpha(a);
  const auto f = static_cast<Eigen::Index>(features.size());
  counts = Eigen::MatrixXi::Zero(f, f);
  mean_abs = Eigen::MatrixXd::Zero(f, f);
}

void InteractionReport::AddPair(std::size_t a, std::size_t b,
                                const Eigen::MatrixXd& slice) {
  AddPair(a, b, SummarizeSlice(slice, alpha));
}

void InteractionReport::AddPair(std::size_t a, std::size_t b,
                                std::vector<CellSummary> pair_cells) {
  if (a >= features.size() || b >= features.size()) {
    throw ValidationError("interaction pair index out of range");
  }
  if (pair_cells.size() != rows) {
    throw ValidationError("interaction slice has the wrong row count");
  }
  if (a > b) std::swap(a, b);
  int count = 0;
  double sum_abs = 0.0;
  for (const auto& c : pair_cells) {
    if (!c.significant) continue;
    ++count;
    sum_abs += std::abs(c.mean);
  }
  const double mean = count > 0 ? sum_abs / count : 0.0;
  const auto ia = static_cast<Eigen::Index>(a);
  const auto ib = static_cast<Eigen::Index>(b);
  counts(ia, ib) = counts(ib, ia) = count;
  mean_abs(ia, ib) = mean_abs(ib, ia) = mean;
  pairs.push_back({a, b, std::move(pair_cells)});
}

InteractionReport MakeInteractionReport(const ShapleyCube& cube, double alpha) {
  InteractionReport report(cube.feature_names, cube.probes(), alpha);
  for (std::size_t i = 0; i < cube.pairs.size(); ++i) {
    report.AddPair(cube.pairs[i].first, cube.pairs[i].second,
                   cube.interactions[i]);
  }
  return report;
}

// --- RuleFit baselines -----------------------------------------------------

namespace {

struct PointCoefficients {
  Eigen::VectorXd a;
  Eigen::VectorXd b;
};

PointCoefficients MeanCoefficients(const FittedModel& model) {
  if (model.draws.retained() == 0) {
    throw ValidationError("model has no posterior draws");
  }
  return {PosteriorMeanA(model.draws), PosteriorMeanB(model.draws)};
}

double RuleMean(const Rule& rule, const Dataset& data) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.rows(); ++i) hits += rule.Evaluate(data, i) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(data.rows());
}

}  // namespace

std::vector<double> RulefitLocalImportance(const FittedModel& model,
                                           const Dataset& data,
                                           std::span<const double> probe) {
  model.CheckSchema(data);
  if (probe.size() != model.columns()) {
    throw ValidationError("probe length does not match the model");
  }
  const auto coef = MeanCoefficients(model);
  std::vector<double> imp(model.features.size(), 0.0);
  const Eigen::MatrixXd z = model.LinearMatrix(data);
  for (std::size_t j = 0; j < model.p(); ++j) {
    const std::size_t col = model.linear_columns[j];
    const double zbar = z.col(static_cast<Eigen::Index>(j)).mean();
    imp[model.column_feature[col]] +=
        std::abs(coef.b[static_cast<Eigen::Index>(j)]) *
        std::abs(model.prep.Standardize(col, probe[col]) - zbar);
  }
  for (std::size_t k = 0; k < model.q(); ++k) {
    const Rule& rule = model.rules[k];
    const double r = rule.Evaluate(probe) ? 1.0 : 0.0;
    const double share = std::abs(coef.a[static_cast<Eigen::Index>(k)]) *
                         std::abs(r - RuleMean(rule, data)) /
                         static_cast<double>(rule.depth());
    for (const auto& c : rule.conditions) imp[model.column_feature[c.feature]] += share;
  }
  return imp;
}

std::vector<double> RulefitGlobalImportance(const FittedModel& model,
                                            const Dataset& data) {
  model.CheckSchema(data);
  const auto coef = MeanCoefficients(model);
  std::vector<double> imp(model.features.size(), 0.0);
  const Eigen::MatrixXd z = model.LinearMatrix(data);
  std::vector<double> col_values(data.rows());
  for (std::size_t j = 0; j < model.p(); ++j) {
    Eigen::Map<Eigen::VectorXd>(col_values.data(), z.rows()) =
        z.col(static_cast<Eigen::Index>(j));
    imp[model.column_feature[model.linear_columns[j]]] +=
        std::abs(coef.b[static_cast<Eigen::Index>(j)]) * PopulationSd(col_values);
  }
  for (std::size_t k = 0; k < model.q(); ++k) {
    const Rule& rule = model.rules[k];
    const double rbar = RuleMean(rule, data);
    const double share = std::abs(coef.a[static_cast<Eigen::Index>(k)]) *
                         std::sqrt(rbar * (1.0 - rbar)) /
                         static_cast<double>(rule.depth());
    for (const auto& c : rule.conditions) imp[model.column_feature[c.feature]] += share;
  }
  return imp;
}

// --- CSV I/O ---------------------------------------------------------------

namespace {

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream OpenOut(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  return out;
}

std::vector<std::vector<std::string>> ReadTable(const std::string& path,
                                                std::size_t columns) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("'" + path + "' is empty");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != columns) {
      throw ParseError(rows.size() + 1, "expected " + std::to_string(columns) +
                                            " fields in '" + path + "'");
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

double ToDouble(const std::string& s, std::size_t row) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(row, "'" + s + "' is not a number");
  }
}

std::size_t FeatureSlot(std::vector<std::string>& names, const std::string& name) {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it != names.end()) return static_cast<std::size_t>(it - names.begin());
  names.push_back(name);
  return names.size() - 1;
}

}  // namespace

void WriteEffectCsv(const EffectReport& report, const std::string& path) {
  auto out = OpenOut(path);
  out << "row_id,feature,mean,lower,upper,significant\n";
  for (std::size_t i = 0; i < report.rows; ++i) {
    for (std::size_t f = 0; f < report.features.size(); ++f) {
      const auto& c = report.cells[f][i];
      out << i << ',' << report.features[f] << ',' << Num(c.mean) << ','
          << Num(c.lower) << ',' << Num(c.upper) << ',' << (c.significant ? 1 : 0)
          << '\n';
    }
  }
}

EffectReport ReadEffectCsv(const std::string& path, double alpha) {
  const auto table = ReadTable(path, 6);
  std::vector<std::string> names;
  std::vector<std::vector<CellSummary>> cells;
  for (std::size_t r = 0; r < table.size(); ++r) {
    const auto& t = table[r];
    const auto row = static_cast<std::size_t>(ToDouble(t[0], r + 1));
    const std::size_t f = FeatureSlot(names, t[1]);
    if (cells.size() < names.size()) cells.emplace_back();
    if (cells[f].size() <= row) cells[f].resize(row + 1);
    CellSummary c;
    c.mean = ToDouble(t[2], r + 1);
    c.lower = ToDouble(t[3], r + 1);
    c.upper = ToDouble(t[4], r + 1);
    c.significant = t[5] == "1";
    cells[f][row] = c;
  }
  EffectReport report(alpha);
  for (std::size_t f = 0; f < names.size(); ++f) {
    report.AddFeature(names[f], std::move(cells[f]));
  }
  return report;
}

void WriteInteractionCsv(const InteractionReport& report,
                         const std::string& path) {
  auto out = OpenOut(path);
  out << "row_id,feature_a,feature_b,mean,lower,upper,significant\n";
  for (std::size_t i = 0; i < report.rows; ++i) {
    for (const auto& p : report.pairs) {
      const auto& c = p.cells[i];
      out << i << ',' << report.features[p.a] << ',' << report.features[p.b] << ','
          << Num(c.mean) << ',' << Num(c.lower) << ',' << Num(c.upper) << ','
          << (c.significant ? 1 : 0) << '\n';
    }
  }
}

InteractionReport ReadInteractionCsv(
    const std::string& path, double alpha,
    const std::vector<std::string>& feature_order) {
  const auto table = ReadTable(path, 7);
  std::vector<std::string> names = feature_order;
  std::vector<std::pair<std::size_t, std::size_t>> keys;
  std::vector<std::vector<CellSummary>> cells;
  std::size_t rows = 0;
  for (std::size_t r = 0; r < table.size(); ++r) {
    const auto& t = table[r];
    const auto row = static_cast<std::size_t>(ToDouble(t[0], r + 1));
    const std::pair<std::size_t, std::size_t> key{FeatureSlot(names, t[1]),
                                                  FeatureSlot(names, t[2])};
    auto it = std::find(keys.begin(), keys.end(), key);
    if (it == keys.end()) {
      keys.push_back(key);
      cells.emplace_back();
      it = keys.end() - 1;
    }
    auto& pc = cells[static_cast<std::size_t>(it - keys.begin())];
    if (pc.size() <= row) pc.resize(row + 1);
    pc[row] = {ToDouble(t[3], r + 1), 0.0, ToDouble(t[4], r + 1),
               ToDouble(t[5], r + 1), t[6] == "1"};
    rows = std::max(rows, row + 1);
  }
  InteractionReport report(names, rows, alpha);
  for (std::size_t k = 0; k < keys.size(); ++k) {
    cells[k].resize(rows);
    report.AddPair(keys[k].first, keys[k].second, std::move(cells[k]));
  }
  return report;
}

void WriteFeatureRatesCsv(const EffectReport& report, const std::string& path) {
  auto out = OpenOut(path);
  out << "feature,rejection_rate\n";
  for (std::size_t f = 0; f < report.features.size(); ++f) {
    out << report.features[f] << ',' << Num(report.rejection_rate[f]) << '\n';
  }
}

void WriteGroupRatesCsv(const std::vector<GroupRate>& rates,
                        const std::string& path) {
  auto out = OpenOut(path);
  out << "group,rejection_rate,features\n";
  for (const auto& g : rates) {
    out << g.group << ',' << Num(g.rate) << ',' << g.features << '\n';
  }
}

void WriteInteractionHeatCsv(const InteractionReport& report,
                             const std::string& path) {
  auto out = OpenOut(path);
  out << "feature_a,feature_b,count,mean_abs\n";
  for (const auto& p : report.pairs) {
    const auto a = static_cast<Eigen::Index>(p.a);
    const auto b = static_cast<Eigen::Index>(p.b);
    out << report.features[p.a] << ',' << report.features[p.b] << ','
        << report.counts(a, b) << ',' << Num(report.mean_abs(a, b)) << '\n';
  }
}

std::map<std::string, std::string> ReadGrouping(const std::string& path) {
  const auto table = ReadTable(path, 2);
  std::map<std::string, std::string> grouping;
  for (const auto& row : table) grouping[row[0]] = row[1];
  if (grouping.empty()) throw ValidationError("grouping file '" + path + "' is empty");
  return grouping;
}

}  // namespace ruleshap
