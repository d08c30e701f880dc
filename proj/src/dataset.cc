#include "ruleshap/dataset.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <unordered_set>

#include "ruleshap/error.h"
#include "ruleshap/stats.h"

namespace ruleshap {

// --- Dataset ---------------------------------------------------------------

Dataset Dataset::FromColumns(std::vector<std::string> names,
                             std::vector<std::vector<double>> columns,
                             std::vector<double> outcome,
                             std::string outcome_name) {
  if (names.size() != columns.size()) {
    throw ValidationError("column name count does not match column count");
  }
  std::vector<FeatureSpec> features;
  std::vector<Column> cols;
  for (std::size_t j = 0; j < names.size(); ++j) {
    features.push_back({names[j], false, {}});
    cols.push_back({names[j], ColumnKind::kContinuous, j, std::move(columns[j])});
  }
  return Dataset(std::move(features), std::move(cols), std::move(outcome),
                 std::move(outcome_name));
}

Dataset::Dataset(std::vector<FeatureSpec> features, std::vector<Column> columns,
                 std::vector<double> outcome, std::string outcome_name)
    : features_(std::move(features)),
      columns_(std::move(columns)),
      outcome_(std::move(outcome)),
      outcome_name_(std::move(outcome_name)) {
  if (outcome_.empty()) throw ValidationError("dataset needs at least one row");
  std::unordered_set<std::string> names;
  for (const Column& c : columns_) {
    if (c.values.size() != outcome_.size()) {
      throw ValidationError("column '" + c.name + "' has " +
                            std::to_string(c.values.size()) + " rows, expected " +
                            std::to_string(outcome_.size()));
    }
    if (!names.insert(c.name).second) {
      throw ValidationError("duplicate column name '" + c.name + "'");
    }
    if (c.feature >= features_.size()) {
      throw ValidationError("column '" + c.name + "' maps to unknown feature");
    }
    for (double v : c.values) {
      if (!std::isfinite(v)) {
        throw ValidationError("non-finite value in column '" + c.name + "'");
      }
    }
  }
  for (double v : outcome_) {
    if (!std::isfinite(v)) throw ValidationError("non-finite outcome value");
  }
}

std::vector<double> Dataset::row(std::size_t i) const {
  std::vector<double> out(cols());
  for (std::size_t j = 0; j < cols(); ++j) out[j] = columns_[j].values[i];
  return out;
}

std::optional<std::size_t> Dataset::find_column(const std::string& name) const {
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    if (columns_[j].name == name) return j;
  }
  return std::nullopt;
}

void Dataset::set_load_report(std::size_t dropped,
                              std::vector<std::string> warnings) {
  dropped_rows_ = dropped;
  warnings_ = std::move(warnings);
}

Dataset Dataset::WithOutcome(std::vector<double> outcome) const {
  Dataset out = *this;
  if (outcome.size() != rows()) {
    throw ValidationError("replacement outcome has wrong length");
  }
  for (double v : outcome) {
    if (!std::isfinite(v)) throw ValidationError("non-finite outcome value");
  }
  out.outcome_ = std::move(outcome);
  return out;
}

Dataset Dataset::Subset(std::span<const std::size_t> rows) const {
  std::vector<Column> cols = columns_;
  for (std::size_t j = 0; j < cols.size(); ++j) {
    cols[j].values.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      cols[j].values[i] = columns_[j].values[rows[i]];
    }
  }
  std::vector<double> y(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) y[i] = outcome_[rows[i]];
  return Dataset(features_, std::move(cols), std::move(y), outcome_name_);
}

// --- CSV -------------------------------------------------------------------

namespace {

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool IsMissing(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan";
}

std::optional<double> ParseNumber(const std::string& cell) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') return std::nullopt;
  return v;
}

struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

RawTable ReadRawTable(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  RawTable table;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("'" + path + "' is empty");
  for (auto& h : SplitCsvLine(line)) table.header.push_back(Trim(h));
  std::size_t data_row = 0;
  while (std::getline(in, line)) {
    if (Trim(line).empty()) continue;
    ++data_row;
    auto cells = SplitCsvLine(line);
    if (cells.size() != table.header.size()) {
      throw ParseError(data_row, "expected " +
                                     std::to_string(table.header.size()) +
                                     " fields, found " +
                                     std::to_string(cells.size()));
    }
    for (auto& c : cells) c = Trim(c);
    table.rows.push_back(std::move(cells));
  }
  if (table.rows.empty()) throw ValidationError("'" + path + "' has no data rows");
  return table;
}

std::size_t HeaderIndex(const RawTable& table, const std::string& name) {
  auto it = std::find(table.header.begin(), table.header.end(), name);
  if (it == table.header.end()) throw MissingColumnError(name);
  return static_cast<std::size_t>(it - table.header.begin());
}

// True for cells that make a row unusable.
bool CellRejected(const std::string& cell, bool categorical) {
  if (IsMissing(cell)) return true;
  if (categorical) return false;
  auto v = ParseNumber(cell);
  return !v || !std::isfinite(*v);
}

std::string DroppedWarning(std::size_t dropped) {
  return "dropped " + std::to_string(dropped) +
         " row(s) with missing or non-finite cells";
}

}  // namespace

Dataset LoadCsv(const std::string& path, const std::string& outcome_name) {
  const RawTable table = ReadRawTable(path);
  const std::size_t outcome_idx = HeaderIndex(table, outcome_name);
  const std::size_t ncol = table.header.size();

  std::vector<bool> categorical(ncol, false);
  for (std::size_t c = 0; c < ncol; ++c) {
    bool any_present = false;
    for (const auto& row : table.rows) {
      if (IsMissing(row[c])) continue;
      any_present = true;
      if (!ParseNumber(row[c])) categorical[c] = true;
    }
    if (!any_present) {
      throw ValidationError("rejected column '" + table.header[c] +
                            "': every cell is missing");
    }
  }
  if (categorical[outcome_idx]) {
    throw ValidationError("outcome column '" + outcome_name +
                          "' is not numeric");
  }

  std::vector<std::size_t> kept;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    bool ok = true;
    for (std::size_t c = 0; c < ncol && ok; ++c) {
      ok = !CellRejected(table.rows[r][c], categorical[c]);
    }
    if (ok) kept.push_back(r);
  }
  if (kept.empty()) throw ValidationError("no complete rows in '" + path + "'");
  const std::size_t dropped = table.rows.size() - kept.size();

  std::vector<FeatureSpec> features;
  std::vector<Column> columns;
  for (std::size_t c = 0; c < ncol; ++c) {
    if (c == outcome_idx) continue;
    const std::size_t feature = features.size();
    if (!categorical[c]) {
      std::vector<double> values;
      values.reserve(kept.size());
      for (std::size_t r : kept) values.push_back(*ParseNumber(table.rows[r][c]));
      features.push_back({table.header[c], false, {}});
      columns.push_back({table.header[c], ColumnKind::kContinuous, feature,
                         std::move(values)});
      continue;
    }
    std::vector<std::string> labels;
    labels.reserve(kept.size());
    for (std::size_t r : kept) labels.push_back(table.rows[r][c]);
    DummyCoding coding = DummyCode(labels);
    features.push_back({table.header[c], true, coding.levels});
    for (std::size_t l = 0; l < coding.levels.size(); ++l) {
      columns.push_back({table.header[c] + "=" + coding.levels[l],
                         ColumnKind::kDummy, feature,
                         std::move(coding.columns[l])});
    }
  }
  std::vector<double> y;
  y.reserve(kept.size());
  for (std::size_t r : kept) y.push_back(*ParseNumber(table.rows[r][outcome_idx]));

  Dataset data(std::move(features), std::move(columns), std::move(y),
               outcome_name);
  std::vector<std::string> warnings;
  if (dropped > 0) warnings.push_back(DroppedWarning(dropped));
  data.set_load_report(dropped, std::move(warnings));
  return data;
}

Dataset LoadCsvWithSchema(const std::string& path,
                          const std::vector<FeatureSpec>& schema,
                          const std::string& outcome_name) {
  const RawTable table = ReadRawTable(path);
  std::vector<std::size_t> idx;
  for (const auto& f : schema) idx.push_back(HeaderIndex(table, f.name));
  std::optional<std::size_t> outcome_idx;
  if (auto it = std::find(table.header.begin(), table.header.end(), outcome_name);
      it != table.header.end()) {
    outcome_idx = static_cast<std::size_t>(it - table.header.begin());
  }

  std::vector<std::size_t> kept;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    bool ok = true;
    for (std::size_t f = 0; f < schema.size() && ok; ++f) {
      ok = !CellRejected(table.rows[r][idx[f]], schema[f].categorical);
    }
    if (ok && outcome_idx) ok = !CellRejected(table.rows[r][*outcome_idx], false);
    if (ok) kept.push_back(r);
  }
  if (kept.empty()) throw ValidationError("no complete rows in '" + path + "'");

  std::vector<Column> columns;
  for (std::size_t f = 0; f < schema.size(); ++f) {
    const FeatureSpec& spec = schema[f];
    if (!spec.categorical) {
      std::vector<double> values;
      for (std::size_t r : kept) values.push_back(*ParseNumber(table.rows[r][idx[f]]));
      columns.push_back({spec.name, ColumnKind::kContinuous, f, std::move(values)});
      continue;
    }
    for (const auto& level : spec.levels) {
      std::vector<double> values;
      for (std::size_t r : kept) {
        values.push_back(table.rows[r][idx[f]] == level ? kDummyMember
                                                        : kDummyNonMember);
      }
      columns.push_back({spec.name + "=" + level, ColumnKind::kDummy, f,
                         std::move(values)});
    }
    for (std::size_t r : kept) {
      const auto& cell = table.rows[r][idx[f]];
      if (std::find(spec.levels.begin(), spec.levels.end(), cell) ==
          spec.levels.end()) {
        throw ValidationError("unknown level '" + cell + "' for feature '" +
                              spec.name + "'");
      }
    }
  }
  std::vector<double> y(kept.size(), 0.0);
  if (outcome_idx) {
    for (std::size_t i = 0; i < kept.size(); ++i) {
      y[i] = *ParseNumber(table.rows[kept[i]][*outcome_idx]);
    }
  }
  Dataset data(schema, std::move(columns), std::move(y), outcome_name);
  const std::size_t dropped = table.rows.size() - kept.size();
  std::vector<std::string> warnings;
  if (dropped > 0) warnings.push_back(DroppedWarning(dropped));
  data.set_load_report(dropped, std::move(warnings));
  return data;
}

void WriteCsv(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  for (std::size_t j = 0; j < data.cols(); ++j) out << data.column(j).name << ',';
  out << data.outcome_name() << '\n';
  char buf[32];
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (std::size_t j = 0; j < data.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", data.at(i, j));
      out << buf << ',';
    }
    std::snprintf(buf, sizeof(buf), "%.17g", data.outcome()[i]);
    out << buf << '\n';
  }
  if (!out) throw ValidationError("failed writing '" + path + "'");
}

// --- Preprocessing ---------------------------------------------------------

double Preprocessing::Winsorize(std::size_t col, double x) const {
  return std::clamp(x, lower[col], upper[col]);
}

double Preprocessing::Standardize(std::size_t col, double x) const {
  if (!retained[col]) return 0.0;
  return (Winsorize(col, x) - mean[col]) / scale[col];
}

std::vector<std::size_t> Preprocessing::LinearColumns() const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < retained.size(); ++j) {
    if (retained[j]) out.push_back(j);
  }
  return out;
}

Dataset Preprocessing::Apply(const Dataset& data) const {
  std::vector<Column> cols;
  for (std::size_t j = 0; j < data.cols(); ++j) {
    Column c = data.column(j);
    for (double& v : c.values) v = Winsorize(j, v);
    cols.push_back(std::move(c));
  }
  std::vector<double> y(data.outcome().begin(), data.outcome().end());
  return Dataset(data.features(), std::move(cols), std::move(y),
                 data.outcome_name());
}

Preprocessing FitPreprocessing(const Dataset& data, double lower_q,
                               double upper_q) {
  if (!(lower_q >= 0.0 && lower_q < upper_q && upper_q <= 1.0)) {
    throw ValidationError("winsorization quantiles must satisfy 0 <= lower < upper <= 1");
  }
  if (data.rows() < 2) {
    throw ValidationError("insufficient data: preprocessing needs at least 2 rows");
  }
  Preprocessing prep;
  const std::size_t p = data.cols();
  prep.lower.resize(p);
  prep.upper.resize(p);
  prep.mean.resize(p);
  prep.scale.resize(p);
  prep.retained.resize(p);
  for (std::size_t j = 0; j < p; ++j) {
    std::vector<double> sorted(data.values(j).begin(), data.values(j).end());
    std::sort(sorted.begin(), sorted.end());
    const bool dummy = data.column(j).kind == ColumnKind::kDummy;
    if (dummy) {
      prep.lower[j] = sorted.front();
      prep.upper[j] = sorted.back();
    } else {
      prep.lower[j] = SortedQuantile(sorted, lower_q);
      prep.upper[j] = SortedQuantile(sorted, upper_q);
    }
    std::vector<double> w(data.values(j).begin(), data.values(j).end());
    for (double& v : w) v = std::clamp(v, prep.lower[j], prep.upper[j]);
    prep.mean[j] = Mean(w);
    const double sd = PopulationSd(w);
    const bool degenerate = sd <= 1e-12 * (1.0 + std::abs(prep.mean[j]));
    prep.retained[j] = !degenerate;
    prep.scale[j] = (dummy || degenerate) ? 1.0 : sd;
    if (degenerate) prep.excluded.push_back(j);
  }
  return prep;
}

// --- Dummy coding ----------------------------------------------------------

DummyCoding DummyCode(std::span<const std::string> labels) {
  std::set<std::string> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) {
    throw ValidationError("degenerate factor: needs at least 2 distinct levels");
  }
  DummyCoding out;
  out.levels.assign(distinct.begin(), distinct.end());
  for (const auto& level : out.levels) {
    std::vector<double> col(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      col[i] = labels[i] == level ? kDummyMember : kDummyNonMember;
    }
    out.columns.push_back(std::move(col));
  }
  return out;
}

// --- Synthetic data --------------------------------------------------------

void FriedmanConfig::Validate() const {
  if (n < 1) throw ValidationError("n must be positive");
  if (p < 5) throw ValidationError("p must be at least 5 (five signal features)");
  if (!(rho >= 0.0 && rho < 1.0)) throw ValidationError("rho must lie in [0, 1)");
  if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) {
    throw ValidationError("sigma2 must be a finite value >= 0");
  }
}

double FriedmanSignal(std::span<const double> x) {
  return 10.0 * std::sin(std::numbers::pi * x[0] * x[1]) +
         20.0 * (x[2] - 0.5) * (x[2] - 0.5) + 10.0 * x[3] + 5.0 * x[4];
}

double CopulaCorrelation(double rho) {
  return 2.0 * std::sin(std::numbers::pi * rho / 6.0);
}

Dataset FriedmanGenerate(const FriedmanConfig& cfg) {
  cfg.Validate();
  Rng rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double latent = CopulaCorrelation(cfg.rho);
  const double shared_w = std::sqrt(latent);
  const double own_w = std::sqrt(1.0 - latent);
  const double noise_sd = std::sqrt(cfg.sigma2);

  std::vector<std::vector<double>> cols(cfg.p, std::vector<double>(cfg.n));
  std::vector<double> y(cfg.n);
  std::vector<double> x(cfg.p);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const double shared = normal(rng);
    for (std::size_t j = 0; j < cfg.p; ++j) {
      x[j] = StandardNormalCdf(shared_w * shared + own_w * normal(rng));
      cols[j][i] = x[j];
    }
    const double eta = FriedmanSignal(x);
    if (cfg.outcome_kind == OutcomeKind::kContinuous) {
      y[i] = eta + noise_sd * normal(rng);
    } else {
      const double prob = 1.0 / (1.0 + std::exp(-(eta - kFriedmanEtaCenter)));
      y[i] = unif(rng) < prob ? 1.0 : 0.0;
    }
  }
  std::vector<std::string> names;
  for (std::size_t j = 0; j < cfg.p; ++j) names.push_back("x" + std::to_string(j + 1));
  return Dataset::FromColumns(std::move(names), std::move(cols), std::move(y));
}

}  // namespace ruleshap
