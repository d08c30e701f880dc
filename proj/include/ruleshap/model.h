#ifndef RULESHAP_MODEL_H_
#define RULESHAP_MODEL_H_

#include <Eigen/Dense>
#include <cstddef>
#include <string>
#include <vector>

#include "ruleshap/dataset.h"
#include "ruleshap/horseshoe.h"
#include "ruleshap/rulegen.h"

namespace ruleshap {

// A fitted rule ensemble
//   F(x) = intercept + sum_k a_k (r_k(x) - rbar_k) + sum_j b_j z_j(x)
// where z_j is the winsorized, standardized j-th linear column and rbar_k is
// the rule's training support. Coefficients are carried as posterior draws.
struct FittedModel {
  std::vector<FeatureSpec> features;
  std::vector<std::string> column_names;
  std::vector<ColumnKind> column_kinds;
  std::vector<std::size_t> column_feature;
  std::string outcome_name = "y";

  Preprocessing prep;
  std::vector<std::size_t> linear_columns;
  std::vector<Rule> rules;
  double intercept = 0.0;
  PosteriorDraws draws;

  SmoothingConfig smoothing;
  GibbsConfig gibbs;
  std::vector<std::string> warnings;

  std::size_t q() const { return rules.size(); }
  std::size_t p() const { return linear_columns.size(); }
  std::size_t columns() const { return column_names.size(); }

  // Throws ValidationError when `data` does not share this model's columns.
  void CheckSchema(const Dataset& data) const;

  // n x q 0/1 rule evaluations.
  Eigen::MatrixXd RuleMatrix(const Dataset& data) const;
  // n x p standardized linear terms z_j(x).
  Eigen::MatrixXd LinearMatrix(const Dataset& data) const;

  // Predictions for explicit coefficient rows: (draws x q), (draws x p)
  // -> draws x n.
  Eigen::MatrixXd Predict(const Dataset& data, const Eigen::MatrixXd& a,
                          const Eigen::MatrixXd& b) const;
  // Prediction with posterior-mean coefficients.
  Eigen::VectorXd PredictMean(const Dataset& data) const;
};

// Copies the column layout of `data` into `model`.
void AdoptSchema(FittedModel& model, const Dataset& data);

// Writes model.json, rules.jsonl and draws.csv under `dir`.
void SaveModel(const FittedModel& model, const std::string& dir);
FittedModel LoadModel(const std::string& dir);

}  // namespace ruleshap

#endif  // RULESHAP_MODEL_H_
