#include "ruleshap/commands.h"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "json.hpp"
#include "ruleshap/error.h"
#include "ruleshap/inference.h"
#include "ruleshap/model.h"
#include "ruleshap/pipeline.h"
#include "ruleshap/shapley.h"
#include "ruleshap/stats.h"

namespace ruleshap {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

void RunConfig::UseFastProfile() {
  total_iters = 2000;
  burn_in = 500;
}

void RunConfig::Validate() const {
  static const char* kCommands[] = {"simulate", "fit", "explain", "report"};
  if (std::find(std::begin(kCommands), std::end(kCommands), command) ==
      std::end(kCommands)) {
    throw ValidationError("unknown command '" + command + "'");
  }
  if (out_dir.empty()) throw ValidationError("--out must not be empty");
  CheckAlpha(alpha);
  if (command == "simulate" || (command == "fit" && input.empty())) {
    friedman.Validate();
  }
  if (command == "fit") {
    GibbsConfig g;
    g.total_iters = total_iters;
    g.burn_in = burn_in;
    g.linear_scale = linear_scale;
    g.Validate();
  }
  if (command == "explain" && model_dir.empty()) {
    throw ValidationError("explain needs --model");
  }
  if (command == "report" && effects.empty()) {
    throw ValidationError("report needs --effects");
  }
}

std::string RunConfig::ToJson() const {
  Json j;
  j["command"] = command;
  j["seed"] = seed;
  j["input"] = input;
  j["outcome"] = outcome;
  j["friedman"] = {{"n", friedman.n},
                   {"p", friedman.p},
                   {"rho", friedman.rho},
                   {"sigma2", friedman.sigma2},
                   {"binary", friedman.outcome_kind == OutcomeKind::kBinary}};
  j["smoothing"] = {{"n_trees", smoothing.n_trees},
                    {"mtry", smoothing.mtry},
                    {"mu", smoothing.mu},
                    {"eta", smoothing.eta},
                    {"min_leaf_fraction", smoothing.min_leaf_fraction},
                    {"min_leaf_count", smoothing.min_leaf_count},
                    {"max_depth", smoothing.max_depth}};
  j["gibbs"] = {{"total_iters", total_iters},
                {"burn_in", burn_in},
                {"linear_scale", linear_scale}};
  j["alpha"] = alpha;
  j["out_dir"] = out_dir;
  j["model_dir"] = model_dir;
  j["probes"] = probes;
  j["interactions"] = interactions;
  j["effects"] = effects;
  j["interaction_csv"] = interaction_csv;
  j["grouping"] = grouping;
  return j.dump();
}

void RunConfig::ApplyJson(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  try {
    auto take = [&j](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    take("command", command);
    take("seed", seed);
    take("input", input);
    take("outcome", outcome);
    take("alpha", alpha);
    take("out_dir", out_dir);
    take("model_dir", model_dir);
    take("probes", probes);
    take("interactions", interactions);
    take("effects", effects);
    take("interaction_csv", interaction_csv);
    take("grouping", grouping);
    if (j.contains("friedman")) {
      const auto& f = j.at("friedman");
      if (f.contains("n")) friedman.n = f.at("n").get<std::size_t>();
      if (f.contains("p")) friedman.p = f.at("p").get<std::size_t>();
      if (f.contains("rho")) friedman.rho = f.at("rho").get<double>();
      if (f.contains("sigma2")) friedman.sigma2 = f.at("sigma2").get<double>();
      if (f.contains("binary") && f.at("binary").get<bool>()) {
        friedman.outcome_kind = OutcomeKind::kBinary;
      }
    }
    if (j.contains("smoothing")) {
      const auto& s = j.at("smoothing");
      if (s.contains("n_trees")) smoothing.n_trees = s.at("n_trees").get<std::size_t>();
      if (s.contains("mtry")) smoothing.mtry = s.at("mtry").get<std::size_t>();
      if (s.contains("mu")) smoothing.mu = s.at("mu").get<double>();
      if (s.contains("eta")) smoothing.eta = s.at("eta").get<double>();
      if (s.contains("min_leaf_fraction")) {
        smoothing.min_leaf_fraction = s.at("min_leaf_fraction").get<double>();
      }
      if (s.contains("min_leaf_count")) {
        smoothing.min_leaf_count = s.at("min_leaf_count").get<std::size_t>();
      }
      if (s.contains("max_depth")) smoothing.max_depth = s.at("max_depth").get<std::size_t>();
    }
    if (j.contains("gibbs")) {
      const auto& g = j.at("gibbs");
      if (g.contains("total_iters")) total_iters = g.at("total_iters").get<std::size_t>();
      if (g.contains("burn_in")) burn_in = g.at("burn_in").get<std::size_t>();
      if (g.contains("linear_scale")) linear_scale = g.at("linear_scale").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config has a malformed field: ") + e.what());
  }
}

std::string FileDigest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

namespace {

class Stopwatch {
 public:
  void Lap(const std::string& name) {
    const auto now = std::chrono::steady_clock::now();
    laps_.emplace_back(name, std::chrono::duration<double>(now - last_).count());
    last_ = now;
  }
  void Append(const StageTimings& stages) {
    laps_.insert(laps_.end(), stages.begin(), stages.end());
    last_ = std::chrono::steady_clock::now();
  }
  StageTimings& laps() { return laps_; }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
  StageTimings laps_;
};

fs::path PrepareOut(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec || !fs::is_directory(cfg.out_dir)) {
    throw ValidationError("cannot create output directory '" + cfg.out_dir + "'");
  }
  return fs::path(cfg.out_dir);
}

void WriteJsonFile(const fs::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

// Manifest: config, version, output digests and optional statistics. It holds
// nothing time-dependent so reruns compare byte-for-byte.
void WriteManifest(const RunConfig& cfg, const fs::path& dir,
                   const std::vector<std::string>& outputs, Json stats = Json::object()) {
  Json j;
  j["version"] = kVersion;
  j["command"] = cfg.command;
  j["config"] = Json::parse(cfg.ToJson());
  Json files = Json::object();
  for (const auto& name : outputs) files[name] = FileDigest((dir / name).string());
  j["outputs"] = std::move(files);
  j["stats"] = std::move(stats);
  WriteJsonFile(dir / "manifest.json", j);
}

void WriteTimings(const fs::path& dir, const StageTimings& laps) {
  Json j = Json::object();
  for (const auto& [name, secs] : laps) j[name] = secs;
  WriteJsonFile(dir / "timings.json", j);
}

// Posterior summaries of the linear terms, standardized and per unit of the
// winsorized original column.
void WriteLinearCoefficientsCsv(const FittedModel& model, const std::string& path,
                                double alpha) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << "column,mean,lower,upper,raw_mean,raw_lower,raw_upper\n";
  if (model.draws.retained() < 2) return;
  const PosteriorSummary summary = SummarizePosterior(model.draws, alpha);
  char buf[256];
  for (std::size_t j = 0; j < model.p(); ++j) {
    const auto& s = summary.b[j];
    const double scale = model.prep.scale[model.linear_columns[j]];
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", s.mean,
                  s.lower, s.upper, s.mean / scale, s.lower / scale, s.upper / scale);
    out << model.column_names[model.linear_columns[j]] << ',' << buf << '\n';
  }
}

FriedmanConfig SeededFriedman(const RunConfig& cfg) {
  FriedmanConfig f = cfg.friedman;
  f.seed = cfg.seed;
  return f;
}

}  // namespace

Dataset LoadTraining(const RunConfig& cfg) {
  if (!cfg.input.empty()) return LoadCsv(cfg.input, cfg.outcome);
  return FriedmanGenerate(SeededFriedman(cfg));
}

void CmdSimulate(const RunConfig& cfg) {
  cfg.Validate();
  Stopwatch sw;
  const fs::path dir = PrepareOut(cfg);
  const FriedmanConfig fc = SeededFriedman(cfg);
  const Dataset data = FriedmanGenerate(fc);
  sw.Lap("generate");
  WriteCsv(data, (dir / "data.csv").string());
  sw.Lap("write");

  Json stats = Json::object();
  if (fc.outcome_kind == OutcomeKind::kContinuous) {
    std::vector<double> noise(data.rows());
    for (std::size_t i = 0; i < data.rows(); ++i) {
      noise[i] = data.outcome()[i] - FriedmanSignal(data.row(i));
    }
    const double sy = SampleSd(data.outcome());
    const double se = SampleSd(noise);
    stats["noise_share"] = sy > 0.0 ? se * se / (sy * sy) : 0.0;
  }
  WriteManifest(cfg, dir, {"data.csv"}, stats);
  WriteTimings(dir, sw.laps());
}

void CmdFit(const RunConfig& cfg) {
  cfg.Validate();
  Stopwatch sw;
  const fs::path dir = PrepareOut(cfg);
  const Dataset data = LoadTraining(cfg);
  sw.Lap("load");

  FitOptions opts;
  opts.smoothing = cfg.smoothing;
  opts.smoothing.seed = cfg.seed;
  opts.gibbs.total_iters = cfg.total_iters;
  opts.gibbs.burn_in = cfg.burn_in;
  opts.gibbs.seed = cfg.seed;
  opts.gibbs.linear_scale = cfg.linear_scale;
  StageTimings stages;
  const FittedModel model = FitRuleshap(data, opts, &stages);
  sw.Append(stages);

  SaveModel(model, cfg.out_dir);
  WriteLinearCoefficientsCsv(model, (dir / "linear_coefficients.csv").string(),
                             cfg.alpha);
  sw.Lap("save");
  Json stats;
  stats["rows"] = data.rows();
  stats["dropped_rows"] = data.dropped_rows();
  stats["rules"] = model.q();
  stats["linear_terms"] = model.p();
  stats["warnings"] = model.warnings;
  WriteManifest(cfg, dir,
                {"model.json", "rules.jsonl", "draws.csv", "linear_coefficients.csv"},
                stats);
  WriteTimings(dir, sw.laps());
}

void CmdExplain(const RunConfig& cfg) {
  cfg.Validate();
  Stopwatch sw;
  const fs::path dir = PrepareOut(cfg);
  const FittedModel model = LoadModel(cfg.model_dir);
  const Dataset background =
      cfg.input.empty()
          ? FriedmanGenerate(SeededFriedman(cfg))
          : LoadCsvWithSchema(cfg.input, model.features, model.outcome_name);
  model.CheckSchema(background);
  const Dataset probes =
      cfg.probes.empty()
          ? background
          : LoadCsvWithSchema(cfg.probes, model.features, model.outcome_name);
  sw.Lap("load");

  const ShapleyEngine engine(model, background, probes);
  const Eigen::MatrixXd& a = model.draws.a;
  const Eigen::MatrixXd& b = model.draws.b;
  std::vector<std::string> names;
  for (const auto& f : model.features) names.push_back(f.name);

  EffectReport effects(cfg.alpha);
  for (std::size_t f = 0; f < engine.features(); ++f) {
    effects.AddFeature(names[f], engine.FeatureSlice(f, a, b));
  }
  sw.Lap("effects");
  std::vector<std::string> outputs = {"effects.csv", "feature_rates.csv",
                                      "rulefit_importance.csv"};
  WriteEffectCsv(effects, (dir / "effects.csv").string());
  WriteFeatureRatesCsv(effects, (dir / "feature_rates.csv").string());

  if (cfg.interactions) {
    InteractionReport inter(names, probes.rows(), cfg.alpha);
    for (const auto& [f, f2] : InteractionPairs(model)) {
      inter.AddPair(f, f2, engine.FeaturePairSlice(f, f2, a));
    }
    sw.Lap("interactions");
    WriteInteractionCsv(inter, (dir / "interactions.csv").string());
    WriteInteractionHeatCsv(inter, (dir / "interaction_heat.csv").string());
    outputs.push_back("interactions.csv");
    outputs.push_back("interaction_heat.csv");
  }

  const auto importance = RulefitGlobalImportance(model, background);
  {
    std::ofstream out(dir / "rulefit_importance.csv", std::ios::binary);
    if (!out) throw ValidationError("cannot write rulefit_importance.csv");
    out << "feature,importance\n";
    char buf[32];
    for (std::size_t f = 0; f < names.size(); ++f) {
      std::snprintf(buf, sizeof(buf), "%.17g", importance[f]);
      out << names[f] << ',' << buf << '\n';
    }
  }
  sw.Lap("write");

  Json stats;
  stats["probes"] = probes.rows();
  stats["draws"] = model.draws.retained();
  Json rates = Json::object();
  for (std::size_t f = 0; f < effects.features.size(); ++f) {
    rates[effects.features[f]] = effects.rejection_rate[f];
  }
  stats["rejection_rates"] = std::move(rates);
  stats["warnings"] = effects.warnings;
  WriteManifest(cfg, dir, outputs, stats);
  WriteTimings(dir, sw.laps());
}

void CmdReport(const RunConfig& cfg) {
  cfg.Validate();
  Stopwatch sw;
  const fs::path dir = PrepareOut(cfg);
  const EffectReport effects = ReadEffectCsv(cfg.effects, cfg.alpha);
  std::map<std::string, std::string> grouping;
  if (cfg.grouping.empty()) {
    for (const auto& f : effects.features) grouping[f] = "all";
  } else {
    grouping = ReadGrouping(cfg.grouping);
  }
  const auto rates = RejectionRates(effects, grouping);
  WriteGroupRatesCsv(rates, (dir / "group_rates.csv").string());
  WriteFeatureRatesCsv(effects, (dir / "feature_rates.csv").string());
  std::vector<std::string> outputs = {"group_rates.csv", "feature_rates.csv"};
  if (!cfg.interaction_csv.empty()) {
    const InteractionReport inter = ReadInteractionCsv(cfg.interaction_csv, cfg.alpha,
                                                         effects.features);
    WriteInteractionHeatCsv(inter, (dir / "interaction_heat.csv").string());
    outputs.push_back("interaction_heat.csv");
  }
  sw.Lap("report");
  Json stats = Json::object();
  for (const auto& g : rates) stats[g.group] = g.rate;
  WriteManifest(cfg, dir, outputs, Json{{"group_rates", stats}});
  WriteTimings(dir, sw.laps());
}

int RunCommand(const RunConfig& cfg, std::ostream& err) {
  try {
    if (cfg.command == "simulate") {
      CmdSimulate(cfg);
    } else if (cfg.command == "fit") {
      CmdFit(cfg);
    } else if (cfg.command == "explain") {
      CmdExplain(cfg);
    } else if (cfg.command == "report") {
      CmdReport(cfg);
    } else {
      throw ValidationError("unknown command '" + cfg.command + "'");
    }
    return 0;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace ruleshap
