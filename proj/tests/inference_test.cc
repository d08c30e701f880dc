#include "ruleshap/inference.h"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "model_fixture.h"
#include "ruleshap/error.h"
#include "ruleshap/stats.h"
#include "test_util.h"

namespace ruleshap {
namespace {

using testing::AssembleModel;
using testing::RandomDraws;

constexpr double kInf = std::numeric_limits<double>::infinity();

Rule MakeRule(std::vector<FeatureCondition> conditions) {
  Rule r;
  r.conditions = std::move(conditions);
  return r;
}

// Draws x rows slice whose cells have mean `shift` and unit noise.
Eigen::MatrixXd NoisySlice(Eigen::Index draws, Eigen::Index rows, double shift,
                           std::mt19937_64& rng) {
  return RandomDraws(draws, rows, 1.0, rng).array() + shift;
}

TEST(CellSummaryTest, ZeroDrawsAreNotSignificant) {
  const std::vector<double> zeros(200, 0.0);
  const CellSummary c = SummarizeCell(zeros, 0.05);
  EXPECT_EQ(c.lower, 0.0);
  EXPECT_EQ(c.upper, 0.0);
  EXPECT_FALSE(c.significant);
}

TEST(CellSummaryTest, AlternatingSignsAreNotSignificant) {
  std::vector<double> draws;
  for (int i = 0; i < 200; ++i) draws.push_back(i % 2 == 0 ? 1.0 : -1.0);
  const CellSummary c = SummarizeCell(draws, 0.05);
  EXPECT_LT(c.lower, 0.0);
  EXPECT_GT(c.upper, 0.0);
  EXPECT_FALSE(c.significant);
}

TEST(CellSummaryTest, TightPositiveDrawsAreSignificant) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> noise(0.0, 0.01);
  std::vector<double> draws;
  for (int i = 0; i < 500; ++i) draws.push_back(2.0 + noise(rng));
  EXPECT_TRUE(SummarizeCell(draws, 0.05).significant);
}

TEST(CellSummaryTest, FlagMatchesIntervalEverywhere) {
  std::mt19937_64 rng(2);
  for (double shift : {-3.0, -1.0, 0.0, 0.5, 2.5}) {
    for (const CellSummary& c : SummarizeSlice(NoisySlice(150, 40, shift, rng), 0.05)) {
      EXPECT_LE(c.lower, c.upper);
      EXPECT_EQ(c.significant, c.lower > 0.0 || c.upper < 0.0);
    }
  }
}

TEST(EffectReportTest, RejectsBadAlpha) {
  EXPECT_THROW(EffectReport(0.0), ValidationError);
  EXPECT_THROW(EffectReport(1.0), ValidationError);
  EXPECT_THROW(CheckAlpha(-0.1), ValidationError);
}

TEST(EffectReportTest, WarnsOnFewDraws) {
  std::mt19937_64 rng(3);
  EffectReport report(0.05);
  report.AddFeature("x1", NoisySlice(50, 10, 0.0, rng));
  EXPECT_EQ(report.warnings.size(), 1u);
  EffectReport enough(0.05);
  enough.AddFeature("x1", NoisySlice(100, 10, 0.0, rng));
  EXPECT_TRUE(enough.warnings.empty());
  EXPECT_THROW(enough.AddFeature("x2", NoisySlice(100, 11, 0.0, rng)), ValidationError);
}

TEST(EffectReportTest, RatesShrinkWithAlpha) {
  std::mt19937_64 rng(4);
  std::vector<Eigen::MatrixXd> slices;
  for (double shift : {0.0, 0.8, 1.6, 2.4}) slices.push_back(NoisySlice(400, 60, shift, rng));
  std::vector<double> previous(slices.size(), 1.0);
  for (double alpha : {0.5, 0.2, 0.1, 0.05, 0.01}) {
    EffectReport report(alpha);
    for (std::size_t f = 0; f < slices.size(); ++f) {
      report.AddFeature("x" + std::to_string(f), slices[f]);
    }
    for (std::size_t f = 0; f < slices.size(); ++f) {
      EXPECT_LE(report.rejection_rate[f], previous[f]);
      previous[f] = report.rejection_rate[f];
    }
  }
}

TEST(RejectionRatesTest, ExtremesAndGrouping) {
  std::mt19937_64 rng(5);
  EffectReport none(0.05);
  none.AddFeature("a", Eigen::MatrixXd::Zero(120, 8));
  none.AddFeature("b", Eigen::MatrixXd::Zero(120, 8));
  const auto zero = RejectionRates(none, {{"a", "signal"}, {"b", "noise"}});
  ASSERT_EQ(zero.size(), 2u);
  EXPECT_EQ(zero[0].group, "signal");
  EXPECT_EQ(zero[0].rate, 0.0);
  EXPECT_EQ(zero[1].rate, 0.0);

  EffectReport all(0.05);
  all.AddFeature("a", Eigen::MatrixXd::Constant(120, 8, 3.0));
  all.AddFeature("b", Eigen::MatrixXd::Constant(120, 8, -3.0));
  all.AddFeature("c", Eigen::MatrixXd::Constant(120, 8, 1.0));
  const auto one = RejectionRates(all, {{"a", "signal"}, {"b", "noise"}, {"c", "noise"}});
  EXPECT_EQ(one[0].rate, 1.0);
  EXPECT_EQ(one[1].rate, 1.0);
  EXPECT_EQ(one[1].features, 2u);

  const auto single = RejectionRates(all, {{"a", "all"}, {"b", "all"}, {"c", "all"}});
  ASSERT_EQ(single.size(), 1u);
  EXPECT_THROW(RejectionRates(all, {{"a", "all"}}), ValidationError);
}

TEST(InteractionReportTest, AdditiveModelHasNoSignificantPairs) {
  std::mt19937_64 rng(6);
  const Dataset data = FriedmanGenerate({.n = 40, .p = 5, .seed = 6});
  const FittedModel model = AssembleModel(
      data, {MakeRule({{0, -kInf, 0.5}}), MakeRule({{3, 0.3, kInf}})},
      RandomDraws(120, 2, 2.0, rng).array() + 3.0, RandomDraws(120, 5, 1.0, rng));
  const InteractionReport report =
      MakeInteractionReport(ModelShapley(model, data, data, true), 0.05);
  EXPECT_EQ(report.counts.cwiseAbs().maxCoeff(), 0);
}

TEST(InteractionReportTest, SingleDepthTwoRuleTouchesOnePair) {
  std::mt19937_64 rng(7);
  const Dataset data = FriedmanGenerate({.n = 60, .p = 5, .seed = 7});
  const FittedModel model =
      AssembleModel(data, {MakeRule({{1, 0.4, kInf}, {4, -kInf, 0.6}})},
                    RandomDraws(150, 1, 0.3, rng).array() + 4.0, RandomDraws(150, 5, 1.0, rng));
  const InteractionReport report =
      MakeInteractionReport(ModelShapley(model, data, data, true), 0.05);
  EXPECT_TRUE(report.counts == report.counts.transpose());
  EXPECT_TRUE(report.mean_abs == report.mean_abs.transpose());
  EXPECT_GT(report.counts(1, 4), 0);
  for (Eigen::Index a = 0; a < 5; ++a) {
    for (Eigen::Index b = 0; b < 5; ++b) {
      EXPECT_LE(report.counts(a, b), 60);
      if (!((a == 1 && b == 4) || (a == 4 && b == 1))) EXPECT_EQ(report.counts(a, b), 0);
    }
  }
}

// Model F of the RuleFit example: x1 + I(x1 < -1) + I(x2 < 3, x3 >= 0) with
// standard normal inputs. Winsorization is disabled so the linear term is x1.
struct ImportanceCase {
  Dataset data = Dataset::FromColumns({"x"}, {{0.0}}, {0.0});
  FittedModel f;
  FittedModel g;
  double r1 = 0, r2 = 0, r3 = 0, sd1 = 0, mean1 = 0;
};

void DisableWinsorization(FittedModel& m) {
  for (std::size_t j = 0; j < m.prep.lower.size(); ++j) {
    m.prep.lower[j] = -kInf;
    m.prep.upper[j] = kInf;
  }
}

ImportanceCase RulefitExample() {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal;
  std::vector<std::vector<double>> cols(3);
  for (auto& c : cols) {
    for (int i = 0; i < 400; ++i) c.push_back(normal(rng));
  }
  ImportanceCase c;
  c.data = Dataset::FromColumns({"x1", "x2", "x3"}, cols, std::vector<double>(400, 0.0));
  c.mean1 = Mean(c.data.values(0));
  c.sd1 = PopulationSd(c.data.values(0));
  const Rule r1 = MakeRule({{0, -kInf, -1.0}});
  const Rule r2 = MakeRule({{1, -kInf, 3.0}, {2, 0.0, kInf}});
  const Rule r3 = MakeRule({{2, 0.0, kInf}});
  for (std::size_t i = 0; i < 400; ++i) {
    c.r1 += r1.Evaluate(c.data, i) ? 1.0 / 400 : 0.0;
    c.r2 += r2.Evaluate(c.data, i) ? 1.0 / 400 : 0.0;
    c.r3 += r3.Evaluate(c.data, i) ? 1.0 / 400 : 0.0;
  }
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(1, 3);
  b(0, 0) = c.sd1;  // unit effect of x1 on the standardized scale
  c.f = AssembleModel(c.data, {r1, r2}, Eigen::MatrixXd::Ones(1, 2), b);
  c.g = AssembleModel(c.data, {r3}, Eigen::MatrixXd::Ones(1, 1), b);
  DisableWinsorization(c.f);
  DisableWinsorization(c.g);
  c.f.prep.mean[0] = c.g.prep.mean[0] = c.mean1;
  c.f.prep.scale[0] = c.g.prep.scale[0] = c.sd1;
  return c;
}

TEST(RulefitImportanceTest, GlobalMatchesHandEvaluation) {
  const ImportanceCase c = RulefitExample();
  const auto f = RulefitGlobalImportance(c.f, c.data);
  const auto g = RulefitGlobalImportance(c.g, c.data);
  EXPECT_NEAR(f[0], c.sd1 + std::sqrt(c.r1 * (1 - c.r1)), 1e-12);
  EXPECT_NEAR(f[1], std::sqrt(c.r2 * (1 - c.r2)) / 2.0, 1e-12);
  EXPECT_NEAR(f[2], std::sqrt(c.r2 * (1 - c.r2)) / 2.0, 1e-12);
  EXPECT_NEAR(g[0], c.sd1, 1e-12);
  EXPECT_EQ(g[1], 0.0);
  EXPECT_NEAR(g[2], std::sqrt(c.r3 * (1 - c.r3)), 1e-12);
  EXPECT_GT(f[0], g[0]);
}

TEST(RulefitImportanceTest, LocalMatchesHandEvaluation) {
  const ImportanceCase c = RulefitExample();
  const std::vector<double> probe = {-1.5, 0.2, 0.7};
  const auto f = RulefitLocalImportance(c.f, c.data, probe);
  const auto g = RulefitLocalImportance(c.g, c.data, probe);
  EXPECT_NEAR(f[0], std::abs(probe[0] - c.mean1) + std::abs(1.0 - c.r1), 1e-12);
  EXPECT_NEAR(f[1], std::abs(1.0 - c.r2) / 2.0, 1e-12);
  EXPECT_NEAR(f[2], f[1], 1e-15);
  EXPECT_NEAR(g[0], std::abs(probe[0] - c.mean1), 1e-12);
  EXPECT_EQ(g[1], 0.0);
  EXPECT_THROW(RulefitLocalImportance(c.f, c.data, std::vector<double>{0.0}), ValidationError);
}

TEST(RulefitImportanceTest, DepthTwoRuleSplitsInHalfAndAbsentFeaturesAreZero) {
  std::mt19937_64 rng(9);
  const Dataset data = FriedmanGenerate({.n = 100, .p = 6, .seed = 9});
  const FittedModel model = AssembleModel(data, {MakeRule({{1, 0.3, kInf}, {4, -kInf, 0.6}})},
                                          Eigen::MatrixXd::Constant(1, 1, -2.0),
                                          Eigen::MatrixXd::Zero(1, 6));
  const auto imp = RulefitGlobalImportance(model, data);
  EXPECT_GT(imp[1], 0.0);
  EXPECT_EQ(imp[1], imp[4]);
  for (std::size_t f : {0, 2, 3, 5}) EXPECT_EQ(imp[f], 0.0);

  const FittedModel mixed = AssembleModel(data, {MakeRule({{0, 0.5, kInf}})},
                                          RandomDraws(20, 1, 1.0, rng), RandomDraws(20, 6, 1.0, rng));
  for (std::size_t i = 0; i < data.rows(); i += 9) {
    for (double v : RulefitLocalImportance(mixed, data, data.row(i))) EXPECT_GE(v, 0.0);
  }
}

TEST(ReportCsvTest, EffectsRoundTrip) {
  std::mt19937_64 rng(10);
  EffectReport report(0.1);
  report.AddFeature("x1", NoisySlice(120, 5, 1.5, rng));
  report.AddFeature("x2", NoisySlice(120, 5, 0.0, rng));
  testing::TempDir dir("effects");
  WriteEffectCsv(report, dir.File("effects.csv"));
  const EffectReport back = ReadEffectCsv(dir.File("effects.csv"), 0.1);
  ASSERT_EQ(back.features, report.features);
  ASSERT_EQ(back.rows, 5u);
  for (std::size_t f = 0; f < 2; ++f) {
    EXPECT_EQ(back.rejection_rate[f], report.rejection_rate[f]);
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_EQ(back.cells[f][i].mean, report.cells[f][i].mean);
      EXPECT_EQ(back.cells[f][i].lower, report.cells[f][i].lower);
      EXPECT_EQ(back.cells[f][i].upper, report.cells[f][i].upper);
      EXPECT_EQ(back.cells[f][i].significant, report.cells[f][i].significant);
    }
  }
  const std::string text = testing::ReadText(dir.File("effects.csv"));
  EXPECT_EQ(text.substr(0, text.find('\n')), "row_id,feature,mean,lower,upper,significant");
}

TEST(ReportCsvTest, InteractionsRoundTrip) {
  std::mt19937_64 rng(11);
  InteractionReport report({"a", "b", "c"}, 4, 0.05);
  report.AddPair(0, 2, NoisySlice(120, 4, 3.0, rng));
  report.AddPair(1, 2, NoisySlice(120, 4, 0.0, rng));
  testing::TempDir dir("inter");
  WriteInteractionCsv(report, dir.File("i.csv"));
  const InteractionReport back = ReadInteractionCsv(dir.File("i.csv"), 0.05, {"a", "b", "c"});
  EXPECT_EQ(back.features, report.features);
  const InteractionReport unordered = ReadInteractionCsv(dir.File("i.csv"), 0.05);
  EXPECT_EQ(unordered.features, (std::vector<std::string>{"a", "c", "b"}));
  EXPECT_TRUE(back.counts == report.counts);
  EXPECT_TRUE(back.mean_abs == report.mean_abs);
}

TEST(ReportCsvTest, GroupingFile) {
  testing::TempDir dir("grouping");
  testing::WriteText(dir.File("g.csv"), "feature,group\nx1,signal\nx6,noise\n");
  const auto grouping = ReadGrouping(dir.File("g.csv"));
  EXPECT_EQ(grouping.size(), 2u);
  EXPECT_EQ(grouping.at("x6"), "noise");
}

}  // namespace
}  // namespace ruleshap
