#include "ruleshap/shapley.h"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "model_fixture.h"
#include "ruleshap/error.h"
#include "test_util.h"

namespace ruleshap {
namespace {

using testing::AssembleModel;
using testing::RandomDraws;

constexpr double kInf = std::numeric_limits<double>::infinity();

FeatureCondition Less(std::size_t j, double c) { return {j, -kInf, c}; }
FeatureCondition AtLeast(std::size_t j, double c) { return {j, c, kInf}; }

Rule MakeRule(std::vector<FeatureCondition> conditions) {
  Rule r;
  r.conditions = std::move(conditions);
  return r;
}

PointFunction RuleFunction(const Rule& rule, double coeff) {
  return [rule, coeff](std::span<const double> x) { return rule.Evaluate(x) ? coeff : 0.0; };
}

// Rows drawn from a small grid so that conditions tie and split evenly.
Dataset GridDataset(std::size_t n, std::size_t p, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> level(0, 4);
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols(p);
  for (std::size_t j = 0; j < p; ++j) {
    names.push_back("x" + std::to_string(j + 1));
    for (std::size_t i = 0; i < n; ++i) cols[j].push_back(level(rng) * 0.25);
  }
  return Dataset::FromColumns(names, cols, std::vector<double>(n, 0.0));
}

std::vector<double> SeededEightRows(std::mt19937_64& rng, Dataset* out) {
  std::normal_distribution<double> normal;
  std::vector<std::vector<double>> cols(3);
  for (auto& c : cols) {
    for (int i = 0; i < 8; ++i) c.push_back(normal(rng));
  }
  *out = Dataset::FromColumns({"x1", "x2", "x3"}, cols, std::vector<double>(8, 0.0));
  return {normal(rng), normal(rng), normal(rng)};
}

TEST(BinomialTest, ExactValuesAndOverflowGuard) {
  EXPECT_TRUE(ExactBinomial(8, 3) == 56);
  EXPECT_TRUE(ExactBinomial(5, 0) == 1);
  EXPECT_TRUE(ExactBinomial(3, 5) == 0);
  EXPECT_TRUE(ExactBinomial(60, 30) == static_cast<unsigned __int128>(118264581564861424ULL));
  EXPECT_THROW(ExactBinomial(140, 70), NumericError);
}

TEST(BinomSumIdentityTest, WorkedExampleAndBaseCase) {
  EXPECT_TRUE(BinomSumIdentityCheck(1, 2, 1));
  for (unsigned a = 0; a < 6; ++a) EXPECT_TRUE(BinomSumIdentityCheck(a, 4, 0));
  EXPECT_THROW(BinomSumIdentityCheck(1, 2, 3), ValidationError);
}

TEST(BinomSumIdentityTest, HoldsExhaustivelyUpToTwelve) {
  for (unsigned a = 0; a <= 12; ++a) {
    for (unsigned b = 0; b <= 12; ++b) {
      for (unsigned c = 0; c <= b; ++c) {
        EXPECT_TRUE(BinomSumIdentityCheck(a, b, c)) << a << "," << b << "," << c;
      }
    }
  }
}

TEST(RuleShapleyTest, TwoRowSingleCondition) {
  const Dataset data = Dataset::FromColumns({"x1", "x2"}, {{-1.0, 1.0}, {3.0, 4.0}}, {0, 0});
  const Rule rule = MakeRule({AtLeast(0, 0.0)});
  const auto phi = RuleShapley(rule, 1.0, data, std::vector<double>{1.0, 0.0});
  EXPECT_DOUBLE_EQ(phi[0], 0.5);
  EXPECT_EQ(phi[1], 0.0);
}

TEST(RuleShapleyTest, ReducedViewCountsSatisfiedConditions) {
  const Dataset data =
      Dataset::FromColumns({"a", "b", "c"}, {{0, 1, 2}, {5, 5, 5}, {0, 0, 3}}, {0, 0, 0});
  const ReducedRuleView view = ReduceRule(MakeRule({AtLeast(0, 1.0), Less(2, 1.0)}), data);
  ASSERT_EQ(view.p_r(), 2u);
  EXPECT_EQ(view.involved, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(view.satisfied, (std::vector<int>{1, 2, 1}));
  for (std::size_t t = 0; t < view.rows; ++t) {
    EXPECT_EQ(view.at(t, 0) + view.at(t, 1), view.satisfied[t]);
  }
}

TEST(RuleShapleyTest, TwoConditionRuleMatchesOracleOnEightRows) {
  std::mt19937_64 rng(8);
  Dataset data = Dataset::FromColumns({"x"}, {{0.0}}, {0.0});
  const Rule rule = MakeRule({AtLeast(0, 0.0), AtLeast(1, 0.0)});
  for (int probe_index = 0; probe_index < 3; ++probe_index) {
    const auto probe = SeededEightRows(rng, &data);
    const auto phi = RuleShapley(rule, 2.0, data, probe);
    const auto oracle =
        BruteForceShapley(RuleFunction(rule, 2.0), data, probe, ShapleyMode::kMarginal);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(phi[j], oracle.marginal[j], 1e-12);
    EXPECT_EQ(phi[2], 0.0);

    const auto inter =
        BruteForceShapley(RuleFunction(rule, 2.0), data, probe, ShapleyMode::kInteraction);
    EXPECT_NEAR(RuleInteractionShapley(rule, 2.0, data, probe, 0, 1), inter.interaction(0, 1),
                1e-12);
  }
}

TEST(RuleShapleyTest, AgreesWithEnumerationOnRandomTrials) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> depth_dist(1, 3);
  std::uniform_int_distribution<std::size_t> n_dist(2, 50);
  std::uniform_int_distribution<int> cut(1, 4);
  std::bernoulli_distribution coin;
  std::normal_distribution<double> normal;
  const std::size_t p = 5;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Dataset data = GridDataset(n_dist(rng), p, rng);
    std::vector<std::size_t> cols = {0, 1, 2, 3, 4};
    std::shuffle(cols.begin(), cols.end(), rng);
    cols.resize(static_cast<std::size_t>(depth_dist(rng)));
    std::sort(cols.begin(), cols.end());
    std::vector<FeatureCondition> conditions;
    for (std::size_t j : cols) {
      const double c = cut(rng) * 0.25 - 0.125;
      conditions.push_back(coin(rng) ? Less(j, c) : AtLeast(j, c));
    }
    const Rule rule = MakeRule(conditions);
    const double coeff = normal(rng);
    std::vector<double> probe(p);
    for (double& v : probe) v = std::uniform_int_distribution<int>(0, 4)(rng) * 0.25;

    const auto phi = RuleShapley(rule, coeff, data, probe);
    const auto marginal =
        BruteForceShapley(RuleFunction(rule, coeff), data, probe, ShapleyMode::kMarginal);
    const auto inter =
        BruteForceShapley(RuleFunction(rule, coeff), data, probe, ShapleyMode::kInteraction);
    for (std::size_t j = 0; j < p; ++j) {
      worst = std::max(worst, std::abs(phi[j] - marginal.marginal[j]));
      for (std::size_t j2 = 0; j2 < p; ++j2) {
        if (j == j2) continue;
        const double v = RuleInteractionShapley(rule, coeff, data, probe, j, j2);
        worst = std::max(worst, std::abs(v - inter.interaction(j, j2)));
      }
    }
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(RuleShapleyTest, EfficiencyNullPlayerAndLinearity) {
  std::mt19937_64 rng(5);
  const Dataset data = GridDataset(30, 4, rng);
  const Rule rule = MakeRule({Less(0, 0.4), AtLeast(2, 0.3), Less(3, 0.9)});
  const std::vector<double> probe = {0.25, 0.75, 0.5, 0.5};
  const auto phi = RuleShapley(rule, 1.0, data, probe);
  double mean = 0.0;
  for (std::size_t t = 0; t < data.rows(); ++t) mean += rule.Evaluate(data, t) ? 1.0 : 0.0;
  mean /= static_cast<double>(data.rows());
  EXPECT_NEAR(phi[0] + phi[1] + phi[2] + phi[3], (rule.Evaluate(probe) ? 1.0 : 0.0) - mean,
              1e-12);
  EXPECT_EQ(phi[1], 0.0);

  const auto scaled = RuleShapley(rule, 3.7, data, probe);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(scaled[j], 3.7 * phi[j]);
}

TEST(RuleInteractionShapleyTest, DepthOneIsZeroAndSymmetric) {
  std::mt19937_64 rng(6);
  const Dataset data = GridDataset(20, 3, rng);
  const std::vector<double> probe = {0.0, 0.5, 1.0};
  const Rule single = MakeRule({Less(1, 0.6)});
  EXPECT_EQ(RuleInteractionShapley(single, 1.0, data, probe, 0, 1), 0.0);
  EXPECT_EQ(RuleInteractionShapley(single, 1.0, data, probe, 1, 2), 0.0);

  const Rule pair = MakeRule({Less(0, 0.6), AtLeast(2, 0.4)});
  EXPECT_EQ(RuleInteractionShapley(pair, 1.3, data, probe, 0, 2),
            RuleInteractionShapley(pair, 1.3, data, probe, 2, 0));
  EXPECT_THROW(RuleInteractionShapley(pair, 1.0, data, probe, 2, 2), ValidationError);
}

TEST(LinearShapleyTest, Examples) {
  EXPECT_EQ(LinearShapley(3.0, 0.4, 0.4), 0.0);
  EXPECT_NEAR(LinearShapley(10.0, 0.5, 0.7), 2.0, 1e-12);
  EXPECT_EQ(LinearShapley(0.0, 0.5, 123.0), 0.0);
}

TEST(BruteForceTest, ConstantAndSingleFeature) {
  std::mt19937_64 rng(7);
  const Dataset data = GridDataset(12, 3, rng);
  const std::vector<double> probe = {0.5, 0.5, 0.5};
  const auto constant = BruteForceShapley([](std::span<const double>) { return 4.2; }, data,
                                          probe, ShapleyMode::kMarginal);
  for (double v : constant.marginal) EXPECT_EQ(v, 0.0);

  const Dataset one = Dataset::FromColumns({"x"}, {{0.0, 0.25, 0.5, 1.0}}, {0, 0, 0, 0});
  const Rule rule = MakeRule({Less(0, 0.3)});
  const auto res = BruteForceShapley(RuleFunction(rule, 1.0), one, std::vector<double>{0.1},
                                     ShapleyMode::kMarginal);
  EXPECT_NEAR(res.marginal[0], 1.0 - 0.5, 1e-15);
}

TEST(BruteForceTest, RefusesTooManyFeatures) {
  std::mt19937_64 rng(8);
  const Dataset data = GridDataset(5, kBruteForceMaxFeatures + 1, rng);
  const std::vector<double> probe(kBruteForceMaxFeatures + 1, 0.0);
  EXPECT_THROW(BruteForceShapley([](std::span<const double>) { return 0.0; }, data, probe,
                                 ShapleyMode::kMarginal),
               ValidationError);
}

// Model evaluated straight from its definition, for the enumeration oracle.
PointFunction ModelFunction(const FittedModel& model, Eigen::Index draw) {
  return [&model, draw](std::span<const double> x) {
    double f = model.intercept;
    for (std::size_t k = 0; k < model.q(); ++k) {
      f += model.draws.a(draw, static_cast<Eigen::Index>(k)) *
           ((model.rules[k].Evaluate(x) ? 1.0 : 0.0) - model.rules[k].support);
    }
    for (std::size_t j = 0; j < model.p(); ++j) {
      const std::size_t col = model.linear_columns[j];
      f += model.draws.b(draw, static_cast<Eigen::Index>(j)) * model.prep.Standardize(col, x[col]);
    }
    return f;
  };
}

struct EngineCase {
  Dataset data = Dataset::FromColumns({"x"}, {{0.0}}, {0.0});
  FittedModel model;
};

EngineCase MixedModel(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  EngineCase c;
  c.data = FriedmanGenerate({.n = 40, .p = 6, .seed = seed});
  std::vector<Rule> rules = {MakeRule({Less(0, 0.5)}), MakeRule({AtLeast(1, 0.3), Less(3, 0.7)}),
                             MakeRule({Less(0, 0.6), AtLeast(2, 0.2), Less(4, 0.8)}),
                             MakeRule({AtLeast(3, 0.4)})};
  c.model = AssembleModel(c.data, std::move(rules), RandomDraws(5, 4, 2.0, rng),
                          RandomDraws(5, 6, 1.0, rng));
  return c;
}

TEST(ShapleyEngineTest, MatchesEnumerationForWholeModel) {
  const EngineCase c = MixedModel(3);
  const ShapleyEngine engine(c.model, c.data, c.data);
  std::vector<Eigen::MatrixXd> slices;
  for (std::size_t j = 0; j < c.data.cols(); ++j) {
    slices.push_back(engine.ColumnSlice(j, c.model.draws.a, c.model.draws.b));
  }
  for (Eigen::Index d = 0; d < 5; ++d) {
    for (std::size_t i = 0; i < c.data.rows(); i += 7) {
      const auto probe = c.data.row(i);
      const auto oracle =
          BruteForceShapley(ModelFunction(c.model, d), c.data, probe, ShapleyMode::kMarginal);
      for (std::size_t j = 0; j < c.data.cols(); ++j) {
        EXPECT_NEAR(slices[j](d, static_cast<Eigen::Index>(i)), oracle.marginal[j], 1e-10);
      }
      const auto inter =
          BruteForceShapley(ModelFunction(c.model, d), c.data, probe, ShapleyMode::kInteraction);
      for (std::size_t j = 0; j < c.data.cols(); ++j) {
        for (std::size_t j2 = j + 1; j2 < c.data.cols(); ++j2) {
          const Eigen::MatrixXd pair = engine.ColumnPairSlice(j, j2, c.model.draws.a);
          EXPECT_NEAR(pair(d, static_cast<Eigen::Index>(i)), inter.interaction(j, j2), 1e-10);
        }
      }
    }
  }
}

TEST(ShapleyEngineTest, AgreesWithPerRuleAttributions) {
  const EngineCase c = MixedModel(4);
  const ShapleyEngine engine(c.model, c.data, c.data);
  const Eigen::MatrixXd zero_b = Eigen::MatrixXd::Zero(5, 6);
  const Eigen::MatrixXd slice = engine.ColumnSlice(3, c.model.draws.a, zero_b);
  for (Eigen::Index d = 0; d < 5; ++d) {
    for (std::size_t i = 0; i < c.data.rows(); ++i) {
      double expect = 0.0;
      for (std::size_t k = 0; k < c.model.q(); ++k) {
        expect += RuleShapley(c.model.rules[k], c.model.draws.a(d, static_cast<Eigen::Index>(k)),
                              c.data, c.data.row(i))[3];
      }
      EXPECT_NEAR(slice(d, static_cast<Eigen::Index>(i)), expect, 1e-12);
    }
  }
}

TEST(ModelShapleyTest, AdditivityAndSymmetry) {
  const EngineCase c = MixedModel(5);
  const ShapleyCube cube = ModelShapley(c.model, c.data, c.data, true);
  EXPECT_EQ(cube.draws(), 5u);
  EXPECT_EQ(cube.probes(), c.data.rows());
  const Eigen::MatrixXd pred = c.model.Predict(c.data, c.model.draws.a, c.model.draws.b);
  EXPECT_LT((cube.predictions - pred).cwiseAbs().maxCoeff(), 1e-10);
  Eigen::MatrixXd total = cube.base.replicate(1, cube.probes());
  for (const auto& v : cube.values) total += v;
  EXPECT_LT((total - pred).cwiseAbs().maxCoeff(), 1e-8);
  for (Eigen::Index d = 0; d < 5; ++d) {
    EXPECT_NEAR(cube.base[d], pred.row(d).mean(), 1e-10);
  }

  const ShapleyEngine engine(c.model, c.data, c.data);
  for (std::size_t j = 0; j < 6; ++j) {
    for (std::size_t j2 = j + 1; j2 < 6; ++j2) {
      const Eigen::MatrixXd ab = engine.ColumnPairSlice(j, j2, c.model.draws.a);
      const Eigen::MatrixXd ba = engine.ColumnPairSlice(j2, j, c.model.draws.a);
      EXPECT_TRUE(ab == ba);
    }
  }
  EXPECT_EQ(cube.pairs.size(), 15u);
}

TEST(ModelShapleyTest, NullModelGivesZeros) {
  const Dataset data = FriedmanGenerate({.n = 30, .p = 5, .seed = 9});
  const FittedModel model = AssembleModel(data, {MakeRule({Less(0, 0.5)})},
                                          Eigen::MatrixXd::Zero(4, 1), Eigen::MatrixXd::Zero(4, 5));
  const ShapleyCube cube = ModelShapley(model, data, data, true);
  for (const auto& v : cube.values) EXPECT_EQ(v.cwiseAbs().maxCoeff(), 0.0);
  for (const auto& v : cube.interactions) EXPECT_EQ(v.cwiseAbs().maxCoeff(), 0.0);
}

TEST(ModelShapleyTest, SingleRuleScalesWithEachDraw) {
  std::mt19937_64 rng(10);
  const Dataset data = FriedmanGenerate({.n = 30, .p = 5, .seed = 10});
  const Rule rule = MakeRule({AtLeast(1, 0.4), Less(4, 0.6)});
  const FittedModel model = AssembleModel(data, {rule}, RandomDraws(3, 1, 1.0, rng),
                                          Eigen::MatrixXd::Zero(3, 5));
  const ShapleyCube cube = ModelShapley(model, data, data, false);
  EXPECT_TRUE(cube.interactions.empty());
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const auto unit = RuleShapley(rule, 1.0, data, data.row(i));
    for (Eigen::Index d = 0; d < 3; ++d) {
      for (std::size_t f = 0; f < 5; ++f) {
        EXPECT_NEAR(cube.values[f](d, static_cast<Eigen::Index>(i)), model.draws.a(d, 0) * unit[f],
                    1e-12);
      }
    }
  }
}

TEST(ModelShapleyTest, UnusedFeatureIsNullPlayer) {
  std::mt19937_64 rng(11);
  const Dataset data = FriedmanGenerate({.n = 30, .p = 5, .seed = 11});
  Eigen::MatrixXd b = RandomDraws(3, 5, 1.0, rng);
  b.col(2).setZero();
  const FittedModel model =
      AssembleModel(data, {MakeRule({Less(0, 0.5), AtLeast(4, 0.2)})}, RandomDraws(3, 1, 1.0, rng), b);
  const ShapleyCube cube = ModelShapley(model, data, data, true);
  EXPECT_EQ(cube.values[2].cwiseAbs().maxCoeff(), 0.0);
  for (std::size_t k = 0; k < cube.pairs.size(); ++k) {
    if (cube.pairs[k].first == 2 || cube.pairs[k].second == 2) {
      EXPECT_EQ(cube.interactions[k].cwiseAbs().maxCoeff(), 0.0);
    }
  }
}

TEST(ModelShapleyTest, DummyColumnsAggregateIntoTheirFactor) {
  testing::TempDir dir("dummy");
  std::string csv = "g,x,y\n";
  const char* levels[] = {"a", "b", "c", "d", "e"};
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> unif;
  for (int i = 0; i < 50; ++i) {
    csv += std::string(levels[i % 5]) + "," + std::to_string(unif(rng)) + "," +
           std::to_string(unif(rng)) + "\n";
  }
  testing::WriteText(dir.File("d.csv"), csv);
  const Dataset data = LoadCsv(dir.File("d.csv"), "y");
  ASSERT_EQ(data.cols(), 6u);
  const std::vector<Rule> rules = {MakeRule({AtLeast(1, 0.0), Less(5, 0.5)}),
                                   MakeRule({AtLeast(0, 0.0), AtLeast(3, 0.0)})};
  const FittedModel model =
      AssembleModel(data, rules, RandomDraws(4, 2, 1.0, rng), RandomDraws(4, 6, 1.0, rng));
  const ShapleyEngine engine(model, data, data);
  Eigen::MatrixXd summed = Eigen::MatrixXd::Zero(4, 50);
  for (std::size_t j = 0; j < 5; ++j) summed += engine.ColumnSlice(j, model.draws.a, model.draws.b);
  EXPECT_LT((engine.FeatureSlice(0, model.draws.a, model.draws.b) - summed).cwiseAbs().maxCoeff(),
            1e-12);

  Eigen::MatrixXd within = Eigen::MatrixXd::Zero(4, 50);
  for (std::size_t j = 0; j < 5; ++j) {
    for (std::size_t j2 = j + 1; j2 < 5; ++j2) within += engine.ColumnPairSlice(j, j2, model.draws.a);
  }
  EXPECT_LT((engine.FeaturePairSlice(0, 0, model.draws.a) - within).cwiseAbs().maxCoeff(), 1e-12);

  const auto pairs = InteractionPairs(model);
  EXPECT_EQ(pairs, (std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {0, 1}}));

  const ShapleyCube cube = ModelShapley(model, data, data, true);
  const Eigen::MatrixXd pred = model.Predict(data, model.draws.a, model.draws.b);
  Eigen::MatrixXd total = cube.base.replicate(1, 50);
  for (const auto& v : cube.values) total += v;
  EXPECT_LT((total - pred).cwiseAbs().maxCoeff(), 1e-8);
}

}  // namespace
}  // namespace ruleshap
