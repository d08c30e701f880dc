#include "ruleshap/pipeline.h"

#include <chrono>

#include "ruleshap/error.h"
#include "ruleshap/stats.h"

namespace ruleshap {

namespace {

template <typename Fn>
auto RunStage(const std::string& name, StageTimings* timings, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  auto record = [&] {
    if (timings != nullptr) {
      timings->emplace_back(
          name, std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                    .count());
    }
  };
  try {
    auto result = fn();
    record();
    return result;
  } catch (const ValidationError& e) {
    throw ValidationError(name + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(name + ": " + e.what());
  }
}

constexpr std::uint64_t kResidualSeedOffset = 0x7265736964ULL;

}  // namespace

DesignMatrices BuildDesign(const FittedModel& model, const Dataset& data) {
  DesignMatrices dm;
  dm.rules = model.RuleMatrix(data);
  dm.linear = model.LinearMatrix(data);
  if (dm.linear.cols() > 0) dm.linear.rowwise() -= dm.linear.colwise().mean();
  const auto y = data.outcome();
  dm.y = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  dm.y.array() -= dm.y.mean();
  for (const Rule& r : model.rules) dm.rule_scales.push_back(r.scale);
  return dm;
}

FittedModel FitRuleshap(const Dataset& data, const FitOptions& options,
                        StageTimings* timings) {
  options.smoothing.Validate(data.cols());
  options.gibbs.Validate();

  FittedModel model;
  AdoptSchema(model, data);
  model.smoothing = options.smoothing;
  model.gibbs = options.gibbs;
  model.warnings = data.warnings();
  model.intercept = Mean(data.outcome());

  model.prep = RunStage("preprocessing", timings, [&] {
    return FitPreprocessing(data, options.winsor_lower, options.winsor_upper);
  });
  model.linear_columns = model.prep.LinearColumns();
  for (std::size_t j : model.prep.excluded) {
    model.warnings.push_back("column '" + data.column(j).name +
                             "' has zero variance; excluded from linear terms");
  }

  const auto residuals = RunStage("residualize", timings, [&] {
    GibbsConfig cfg = options.gibbs;
    cfg.seed = options.gibbs.seed + kResidualSeedOffset;
    return Residualize(data, data.outcome(), model.prep, cfg);
  });

  const Forest forest = RunStage("smoothing_forest", timings, [&] {
    return SmoothingForest(data, OutcomeView(residuals), options.smoothing);
  });

  RuleSet rules = RunStage("extract_rules", timings, [&] {
    return ExtractRules(forest, data, options.smoothing);
  });
  if (rules.empty()) {
    model.warnings.push_back("no rules survived filtering; fitting linear terms only");
  }
  model.rules = std::move(rules.rules);
  if (model.q() + model.p() == 0) {
    throw ValidationError("model has neither rules nor linear terms");
  }

  model.draws = RunStage("gibbs_fit", timings, [&] {
    return GibbsFit(BuildDesign(model, data), options.gibbs);
  });
  return model;
}

}  // namespace ruleshap
