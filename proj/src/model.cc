#include "ruleshap/model.h"

#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "ruleshap/error.h"

namespace ruleshap {

using Json = nlohmann::ordered_json;

void FittedModel::CheckSchema(const Dataset& data) const {
  if (data.cols() != columns()) {
    throw ValidationError("data has " + std::to_string(data.cols()) +
                          " columns, model expects " +
                          std::to_string(columns()));
  }
  for (std::size_t j = 0; j < columns(); ++j) {
    if (data.column(j).name != column_names[j]) {
      throw MissingColumnError(column_names[j]);
    }
  }
}

Eigen::MatrixXd FittedModel::RuleMatrix(const Dataset& data) const {
  const auto n = static_cast<Eigen::Index>(data.rows());
  Eigen::MatrixXd m(n, static_cast<Eigen::Index>(q()));
  for (std::size_t k = 0; k < q(); ++k) {
    for (Eigen::Index i = 0; i < n; ++i) {
      m(i, static_cast<Eigen::Index>(k)) =
          rules[k].Evaluate(data, static_cast<std::size_t>(i)) ? 1.0 : 0.0;
    }
  }
  return m;
}

Eigen::MatrixXd FittedModel::LinearMatrix(const Dataset& data) const {
  const auto n = static_cast<Eigen::Index>(data.rows());
  Eigen::MatrixXd m(n, static_cast<Eigen::Index>(p()));
  for (std::size_t j = 0; j < p(); ++j) {
    const std::size_t col = linear_columns[j];
    for (Eigen::Index i = 0; i < n; ++i) {
      m(i, static_cast<Eigen::Index>(j)) =
          prep.Standardize(col, data.at(static_cast<std::size_t>(i), col));
    }
  }
  return m;
}

Eigen::MatrixXd FittedModel::Predict(const Dataset& data,
                                     const Eigen::MatrixXd& a,
                                     const Eigen::MatrixXd& b) const {
  CheckSchema(data);
  if (static_cast<std::size_t>(a.cols()) != q() ||
      static_cast<std::size_t>(b.cols()) != p() || a.rows() != b.rows()) {
    throw ValidationError("coefficient matrices do not match the model");
  }
  Eigen::MatrixXd rm = RuleMatrix(data);
  for (std::size_t k = 0; k < q(); ++k) {
    rm.col(static_cast<Eigen::Index>(k)).array() -= rules[k].support;
  }
  Eigen::MatrixXd out =
      Eigen::MatrixXd::Constant(a.rows(), static_cast<Eigen::Index>(data.rows()),
                                intercept);
  if (q() > 0) out.noalias() += a * rm.transpose();
  if (p() > 0) out.noalias() += b * LinearMatrix(data).transpose();
  return out;
}

Eigen::VectorXd FittedModel::PredictMean(const Dataset& data) const {
  const Eigen::MatrixXd a = PosteriorMeanA(draws).transpose();
  const Eigen::MatrixXd b = PosteriorMeanB(draws).transpose();
  return Predict(data, a, b).row(0).transpose();
}

void AdoptSchema(FittedModel& model, const Dataset& data) {
  model.features = data.features();
  model.outcome_name = data.outcome_name();
  model.column_names.clear();
  model.column_kinds.clear();
  model.column_feature.clear();
  for (std::size_t j = 0; j < data.cols(); ++j) {
    model.column_names.push_back(data.column(j).name);
    model.column_kinds.push_back(data.column(j).kind);
    model.column_feature.push_back(data.column(j).feature);
  }
}

namespace {

Json SmoothingToJson(const SmoothingConfig& c) {
  Json j;
  j["n_trees"] = c.n_trees;
  j["mtry"] = c.mtry;
  j["mu"] = c.mu;
  j["eta"] = c.eta;
  j["seed"] = c.seed;
  j["min_leaf_fraction"] = c.min_leaf_fraction;
  j["min_leaf_count"] = c.min_leaf_count;
  j["max_depth"] = c.max_depth;
  return j;
}

Json GibbsToJson(const GibbsConfig& c) {
  Json j;
  j["total_iters"] = c.total_iters;
  j["burn_in"] = c.burn_in;
  j["seed"] = c.seed;
  j["linear_scale"] = c.linear_scale;
  return j;
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

void SaveModel(const FittedModel& model, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create output directory '" + dir + "'");

  Json j;
  j["outcome"] = model.outcome_name;
  Json features = Json::array();
  for (const auto& f : model.features) {
    features.push_back({{"name", f.name}, {"categorical", f.categorical},
                        {"levels", f.levels}});
  }
  j["features"] = std::move(features);
  Json columns = Json::array();
  for (std::size_t c = 0; c < model.columns(); ++c) {
    columns.push_back(
        {{"name", model.column_names[c]},
         {"kind", model.column_kinds[c] == ColumnKind::kDummy ? "dummy" : "continuous"},
         {"feature", model.column_feature[c]},
         {"lower", model.prep.lower[c]},
         {"upper", model.prep.upper[c]},
         {"mean", model.prep.mean[c]},
         {"scale", model.prep.scale[c]},
         {"retained", static_cast<bool>(model.prep.retained[c])}});
  }
  j["columns"] = std::move(columns);
  j["linear_columns"] = model.linear_columns;
  j["intercept"] = model.intercept;
  j["rule_count"] = model.q();
  j["smoothing"] = SmoothingToJson(model.smoothing);
  j["gibbs"] = GibbsToJson(model.gibbs);
  j["warnings"] = model.warnings;

  const fs::path base(dir);
  {
    std::ofstream out(base / "model.json", std::ios::binary);
    if (!out) throw ValidationError("cannot write model.json under '" + dir + "'");
    out << j.dump(2) << '\n';
  }
  WriteRules(model.rules, (base / "rules.jsonl").string());
  WriteDrawsCsv(model.draws, (base / "draws.csv").string());
}

FittedModel LoadModel(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path base(dir);
  FittedModel m;
  try {
    const auto j = nlohmann::json::parse(ReadFile(base / "model.json"));
    m.outcome_name = j.at("outcome").get<std::string>();
    for (const auto& f : j.at("features")) {
      m.features.push_back({f.at("name").get<std::string>(),
                            f.at("categorical").get<bool>(),
                            f.at("levels").get<std::vector<std::string>>()});
    }
    for (const auto& c : j.at("columns")) {
      m.column_names.push_back(c.at("name").get<std::string>());
      m.column_kinds.push_back(c.at("kind").get<std::string>() == "dummy"
                                   ? ColumnKind::kDummy
                                   : ColumnKind::kContinuous);
      m.column_feature.push_back(c.at("feature").get<std::size_t>());
      m.prep.lower.push_back(c.at("lower").get<double>());
      m.prep.upper.push_back(c.at("upper").get<double>());
      m.prep.mean.push_back(c.at("mean").get<double>());
      m.prep.scale.push_back(c.at("scale").get<double>());
      const bool kept = c.at("retained").get<bool>();
      m.prep.retained.push_back(kept);
      if (!kept) m.prep.excluded.push_back(m.column_names.size() - 1);
    }
    m.linear_columns = j.at("linear_columns").get<std::vector<std::size_t>>();
    m.intercept = j.at("intercept").get<double>();
    const auto& s = j.at("smoothing");
    m.smoothing.n_trees = s.at("n_trees").get<std::size_t>();
    m.smoothing.mtry = s.at("mtry").get<std::size_t>();
    m.smoothing.mu = s.at("mu").get<double>();
    m.smoothing.eta = s.at("eta").get<double>();
    m.smoothing.seed = s.at("seed").get<std::uint64_t>();
    m.smoothing.min_leaf_fraction = s.at("min_leaf_fraction").get<double>();
    m.smoothing.min_leaf_count = s.at("min_leaf_count").get<std::size_t>();
    m.smoothing.max_depth = s.at("max_depth").get<std::size_t>();
    const auto& g = j.at("gibbs");
    m.gibbs.total_iters = g.at("total_iters").get<std::size_t>();
    m.gibbs.burn_in = g.at("burn_in").get<std::size_t>();
    m.gibbs.seed = g.at("seed").get<std::uint64_t>();
    m.gibbs.linear_scale = g.at("linear_scale").get<double>();
    m.warnings = j.at("warnings").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed model.json in '" + dir + "': " + e.what());
  }
  m.rules = ReadRules((base / "rules.jsonl").string());
  m.draws = ReadDrawsCsv((base / "draws.csv").string());
  m.draws.total_iters = m.gibbs.total_iters;
  m.draws.burn_in = m.gibbs.burn_in;
  m.draws.seed = m.gibbs.seed;
  if (m.draws.q() != m.q() || m.draws.p() != m.p()) {
    throw ValidationError("draws.csv does not match the rule and linear term counts");
  }
  return m;
}

}  // namespace ruleshap
