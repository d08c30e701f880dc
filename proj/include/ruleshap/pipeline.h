#ifndef RULESHAP_PIPELINE_H_
#define RULESHAP_PIPELINE_H_

#include <string>
#include <utility>
#include <vector>

#include "ruleshap/dataset.h"
#include "ruleshap/horseshoe.h"
#include "ruleshap/model.h"
#include "ruleshap/rulegen.h"

namespace ruleshap {

struct FitOptions {
  SmoothingConfig smoothing;
  GibbsConfig gibbs;
  double winsor_lower = 0.025;
  double winsor_upper = 0.975;
};

// Wall-clock seconds per named stage, in execution order.
using StageTimings = std::vector<std::pair<std::string, double>>;

// preprocessing -> residualize -> smoothing forest -> rule extraction ->
// Gibbs fit. Errors carry the failing stage's name and keep their type.
FittedModel FitRuleshap(const Dataset& data, const FitOptions& options,
                        StageTimings* timings = nullptr);

// Design matrices of `model` on its training data and outcome.
DesignMatrices BuildDesign(const FittedModel& model, const Dataset& data);

}  // namespace ruleshap

#endif  // RULESHAP_PIPELINE_H_
