#ifndef RULESHAP_DATASET_H_
#define RULESHAP_DATASET_H_

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ruleshap {

enum class ColumnKind { kContinuous, kDummy };

// One original input feature. A categorical feature expands into one dummy
// column per level.
struct FeatureSpec {
  std::string name;
  bool categorical = false;
  std::vector<std::string> levels;  // sorted; empty for continuous features
};

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::kContinuous;
  std::size_t feature = 0;  // index into Dataset::features()
  std::vector<double> values;
};

// Immutable n x p numeric design plus outcome.
class Dataset {
 public:
  // Builds a dataset of continuous columns, one feature per column.
  static Dataset FromColumns(std::vector<std::string> names,
                             std::vector<std::vector<double>> columns,
                             std::vector<double> outcome,
                             std::string outcome_name = "y");

  Dataset(std::vector<FeatureSpec> features, std::vector<Column> columns,
          std::vector<double> outcome, std::string outcome_name);

  std::size_t rows() const { return outcome_.size(); }
  std::size_t cols() const { return columns_.size(); }

  const Column& column(std::size_t j) const { return columns_[j]; }
  std::span<const double> values(std::size_t j) const {
    return columns_[j].values;
  }
  double at(std::size_t row, std::size_t col) const {
    return columns_[col].values[row];
  }
  std::vector<double> row(std::size_t i) const;

  std::span<const double> outcome() const { return outcome_; }
  const std::string& outcome_name() const { return outcome_name_; }

  const std::vector<FeatureSpec>& features() const { return features_; }
  std::size_t feature_of(std::size_t col) const {
    return columns_[col].feature;
  }
  std::optional<std::size_t> find_column(const std::string& name) const;

  // Rows rejected at load because of missing or non-finite cells.
  std::size_t dropped_rows() const { return dropped_rows_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  void set_load_report(std::size_t dropped, std::vector<std::string> warnings);

  // Same schema, different outcome.
  Dataset WithOutcome(std::vector<double> outcome) const;
  // Row subset (indices may repeat).
  Dataset Subset(std::span<const std::size_t> rows) const;

 private:
  std::vector<FeatureSpec> features_;
  std::vector<Column> columns_;
  std::vector<double> outcome_;
  std::string outcome_name_;
  std::size_t dropped_rows_ = 0;
  std::vector<std::string> warnings_;
};

// --- CSV -------------------------------------------------------------------

// Reads a header-first, comma-separated file. Empty, "NA" and "NaN" cells are
// missing; rows with any missing or non-finite cell are dropped and counted.
// Columns with any non-numeric cell become categorical and are dummy coded.
Dataset LoadCsv(const std::string& path, const std::string& outcome_name);

// Reads a file against a known feature schema (e.g. probe rows for a fitted
// model). The outcome column is optional; when absent the outcome is zero.
Dataset LoadCsvWithSchema(const std::string& path,
                          const std::vector<FeatureSpec>& schema,
                          const std::string& outcome_name);

// Writes columns then outcome with full double precision.
void WriteCsv(const Dataset& data, const std::string& path);

// --- Preprocessing ---------------------------------------------------------

// Per-column transforms for the linear terms. Continuous columns are
// winsorized and standardized; dummy columns are only centered (their -0.5/2
// coding already has unit scale for balanced factors). Zero-variance columns
// are excluded from the linear terms.
struct Preprocessing {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> mean;
  std::vector<double> scale;
  std::vector<bool> retained;
  std::vector<std::size_t> excluded;

  double Winsorize(std::size_t col, double x) const;
  // (winsorize(x) - mean) / scale.
  double Standardize(std::size_t col, double x) const;
  // Indices of the retained (linear-term) columns, ascending.
  std::vector<std::size_t> LinearColumns() const;
  // Winsorized copy of `data` with identical schema.
  Dataset Apply(const Dataset& data) const;
};

Preprocessing FitPreprocessing(const Dataset& data, double lower_q = 0.025,
                               double upper_q = 0.975);

// --- Dummy coding ----------------------------------------------------------

inline constexpr double kDummyMember = 2.0;
inline constexpr double kDummyNonMember = -0.5;

struct DummyCoding {
  std::vector<std::string> levels;            // sorted distinct levels
  std::vector<std::vector<double>> columns;   // one per level
};

DummyCoding DummyCode(std::span<const std::string> labels);

// --- Synthetic data --------------------------------------------------------

enum class OutcomeKind { kContinuous, kBinary };

struct FriedmanConfig {
  std::size_t n = 1000;
  std::size_t p = 10;
  double rho = 0.3;
  double sigma2 = 100.0;
  std::uint64_t seed = 1;
  OutcomeKind outcome_kind = OutcomeKind::kContinuous;

  void Validate() const;
};

// Centering constant for the logistic variant.
inline constexpr double kFriedmanEtaCenter = 14.4;

// 10 sin(pi x1 x2) + 20 (x3 - 0.5)^2 + 10 x4 + 5 x5.
double FriedmanSignal(std::span<const double> x);

// Gaussian-copula equicorrelation that yields Pearson correlation ~rho
// between the resulting uniforms.
double CopulaCorrelation(double rho);

Dataset FriedmanGenerate(const FriedmanConfig& cfg);

}  // namespace ruleshap

#endif  // RULESHAP_DATASET_H_
