#include "ruleshap/commands.h"

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "model_fixture.h"
#include "ruleshap/error.h"
#include "ruleshap/model.h"
#include "test_util.h"

namespace ruleshap {
namespace {

using testing::ReadText;
using testing::TempDir;
using testing::WriteText;

RunConfig Simulate(const std::string& out, std::size_t n = 100) {
  RunConfig cfg;
  cfg.command = "simulate";
  cfg.friedman.n = n;
  cfg.out_dir = out;
  return cfg;
}

RunConfig SmallFit(const std::string& input, const std::string& out) {
  RunConfig cfg;
  cfg.command = "fit";
  cfg.input = input;
  cfg.out_dir = out;
  cfg.smoothing.n_trees = 15;
  cfg.total_iters = 400;
  cfg.burn_in = 100;
  return cfg;
}

std::size_t CountLines(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

int RunQuiet(const RunConfig& cfg) {
  std::ostringstream err;
  return RunCommand(cfg, err);
}

TEST(SimulateTest, ByteIdenticalReruns) {
  TempDir dir("simulate");
  const RunConfig cfg = Simulate(dir.File("out"));
  ASSERT_EQ(RunQuiet(cfg), 0);
  const std::string data = ReadText(dir.File("out/data.csv"));
  const std::string manifest = ReadText(dir.File("out/manifest.json"));
  ASSERT_EQ(RunQuiet(cfg), 0);
  EXPECT_EQ(ReadText(dir.File("out/data.csv")), data);
  EXPECT_EQ(ReadText(dir.File("out/manifest.json")), manifest);
  EXPECT_EQ(CountLines(data), 101u);
  EXPECT_EQ(data.substr(0, data.find('\n')), "x1,x2,x3,x4,x5,x6,x7,x8,x9,x10,y");
}

TEST(SimulateTest, NoiseShareNearFourFifths) {
  TempDir dir("noise");
  ASSERT_EQ(RunQuiet(Simulate(dir.File("out"), 10000)), 0);
  const auto manifest = nlohmann::json::parse(ReadText(dir.File("out/manifest.json")));
  const double share = manifest["stats"]["noise_share"].get<double>();
  EXPECT_GE(share, 0.7);
  EXPECT_LE(share, 0.9);
  EXPECT_EQ(manifest["outputs"]["data.csv"].get<std::string>(),
            FileDigest(dir.File("out/data.csv")));
}

TEST(RunCommandTest, ExitCodes) {
  TempDir dir("codes");
  RunConfig bad = Simulate(dir.File("out"));
  bad.friedman.p = 4;
  std::ostringstream err;
  EXPECT_EQ(RunCommand(bad, err), 1);
  EXPECT_NE(err.str().find("p must be at least 5"), std::string::npos);

  RunConfig missing = SmallFit(dir.File("absent.csv"), dir.File("fit"));
  EXPECT_EQ(RunQuiet(missing), 1);

  RunConfig alpha = Simulate(dir.File("out"));
  alpha.alpha = 1.5;
  EXPECT_EQ(RunQuiet(alpha), 1);

  RunConfig unknown;
  unknown.command = "train";
  EXPECT_EQ(RunQuiet(unknown), 1);
}

TEST(RunConfigTest, JsonOverlayRoundTrip) {
  RunConfig cfg;
  cfg.ApplyJson(R"({"command":"fit","seed":9,"friedman":{"n":250,"rho":0.1},
                    "smoothing":{"n_trees":40},"gibbs":{"total_iters":900,"burn_in":100},
                    "alpha":0.1})");
  EXPECT_EQ(cfg.command, "fit");
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.friedman.n, 250u);
  EXPECT_EQ(cfg.friedman.p, 10u);
  EXPECT_EQ(cfg.smoothing.n_trees, 40u);
  EXPECT_EQ(cfg.total_iters, 900u);
  EXPECT_EQ(cfg.alpha, 0.1);
  RunConfig copy;
  copy.ApplyJson(cfg.ToJson());
  EXPECT_EQ(copy.ToJson(), cfg.ToJson());
  EXPECT_THROW(cfg.ApplyJson("{not json"), ValidationError);
  EXPECT_THROW(cfg.ApplyJson("[1,2]"), ValidationError);
}

TEST(RunConfigTest, FastProfile) {
  RunConfig cfg;
  EXPECT_EQ(cfg.total_iters, 22000u);
  EXPECT_EQ(cfg.burn_in, 2000u);
  cfg.UseFastProfile();
  EXPECT_EQ(cfg.total_iters, 2000u);
  EXPECT_EQ(cfg.burn_in, 500u);
}

class EndToEndTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("e2e");
    RunConfig sim = Simulate(dir_->File("sim"), 200);
    sim.friedman.p = 6;
    ASSERT_EQ(RunQuiet(sim), 0);
    ASSERT_EQ(RunQuiet(SmallFit(dir_->File("sim/data.csv"), dir_->File("fit"))), 0);
    RunConfig explain;
    explain.command = "explain";
    explain.model_dir = dir_->File("fit");
    explain.input = dir_->File("sim/data.csv");
    explain.out_dir = dir_->File("explain");
    ASSERT_EQ(RunQuiet(explain), 0);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static TempDir* dir_;
};

TempDir* EndToEndTest::dir_ = nullptr;

TEST_F(EndToEndTest, FitWritesModelFiles) {
  for (const char* name : {"model.json", "rules.jsonl", "draws.csv", "linear_coefficients.csv",
                           "manifest.json", "timings.json"}) {
    EXPECT_FALSE(ReadText(dir_->File(std::string("fit/") + name)).empty()) << name;
  }
  const FittedModel model = LoadModel(dir_->File("fit"));
  EXPECT_EQ(model.draws.retained(), 300u);
  EXPECT_EQ(CountLines(ReadText(dir_->File("fit/rules.jsonl"))), model.q());
  EXPECT_EQ(CountLines(ReadText(dir_->File("fit/linear_coefficients.csv"))), model.p() + 1);
}

TEST_F(EndToEndTest, FitIsDeterministic) {
  const std::string out = dir_->File("fit");
  const std::string manifest = ReadText(out + "/manifest.json");
  const std::string draws = ReadText(out + "/draws.csv");
  ASSERT_EQ(RunQuiet(SmallFit(dir_->File("sim/data.csv"), out)), 0);
  EXPECT_EQ(ReadText(out + "/manifest.json"), manifest);
  EXPECT_EQ(ReadText(out + "/draws.csv"), draws);
}

TEST_F(EndToEndTest, ExplainRowCountIsProbesTimesFeatures) {
  const std::string effects = ReadText(dir_->File("explain/effects.csv"));
  EXPECT_EQ(CountLines(effects), 1 + 200u * 6u);
  const std::string inter = ReadText(dir_->File("explain/interactions.csv"));
  EXPECT_EQ(CountLines(inter), 1 + 200u * 15u);
  EXPECT_EQ(CountLines(ReadText(dir_->File("explain/feature_rates.csv"))), 7u);
}

TEST_F(EndToEndTest, ReportGroupsFeatures) {
  WriteText(dir_->File("grouping.csv"),
            "feature,group\nx1,signal\nx2,signal\nx3,signal\nx4,signal\nx5,signal\nx6,noise\n");
  RunConfig report;
  report.command = "report";
  report.effects = dir_->File("explain/effects.csv");
  report.interaction_csv = dir_->File("explain/interactions.csv");
  report.grouping = dir_->File("grouping.csv");
  report.out_dir = dir_->File("report");
  ASSERT_EQ(RunQuiet(report), 0);
  const std::string rates = ReadText(dir_->File("report/group_rates.csv"));
  EXPECT_EQ(CountLines(rates), 3u);
  EXPECT_NE(rates.find("\nsignal,"), std::string::npos);
  EXPECT_NE(rates.find("\nnoise,"), std::string::npos);
  EXPECT_EQ(ReadText(dir_->File("report/interaction_heat.csv")),
            ReadText(dir_->File("explain/interaction_heat.csv")));

  report.grouping.clear();
  report.out_dir = dir_->File("report_all");
  ASSERT_EQ(RunQuiet(report), 0);
  EXPECT_EQ(CountLines(ReadText(dir_->File("report_all/group_rates.csv"))), 2u);
}

TEST_F(EndToEndTest, ProbeSchemaMismatchNamesColumn) {
  WriteText(dir_->File("probes.csv"), "x1,x2,x3,x4,x5,y\n0.1,0.2,0.3,0.4,0.5,1\n");
  RunConfig explain;
  explain.command = "explain";
  explain.model_dir = dir_->File("fit");
  explain.input = dir_->File("sim/data.csv");
  explain.probes = dir_->File("probes.csv");
  explain.out_dir = dir_->File("bad_probes");
  std::ostringstream err;
  EXPECT_EQ(RunCommand(explain, err), 1);
  EXPECT_NE(err.str().find("x6"), std::string::npos) << err.str();
}

TEST(ExplainTest, NullModelGivesAllZeroReport) {
  TempDir dir("null");
  const Dataset data = FriedmanGenerate({.n = 40, .p = 5, .seed = 3});
  WriteCsv(data, dir.File("data.csv"));
  Rule rule;
  rule.conditions = {{0, 0.5, std::numeric_limits<double>::infinity()}};
  const FittedModel model = testing::AssembleModel(data, {rule}, Eigen::MatrixXd::Zero(120, 1),
                                                   Eigen::MatrixXd::Zero(120, 5));
  SaveModel(model, dir.File("model"));
  RunConfig explain;
  explain.command = "explain";
  explain.model_dir = dir.File("model");
  explain.input = dir.File("data.csv");
  explain.out_dir = dir.File("explain");
  ASSERT_EQ(RunQuiet(explain), 0);
  std::istringstream lines(ReadText(dir.File("explain/effects.csv")));
  std::string line;
  std::getline(lines, line);
  std::size_t rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    EXPECT_NE(line.find(",0,0,0,0"), std::string::npos) << line;
  }
  EXPECT_EQ(rows, 40u * 5u);
}

#ifdef RULESHAP_CLI_PATH
int RunCli(const std::string& args) {
  const std::string cmd = std::string(RULESHAP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(CliTest, ExitCodesAndConfigOverride) {
  TempDir dir("cli");
  EXPECT_EQ(RunCli("simulate --p 4 --out " + dir.File("a")), 1);
  EXPECT_EQ(RunCli("simulate --bogus"), 1);
  EXPECT_EQ(RunCli("--version"), 0);
  WriteText(dir.File("cfg.json"), R"({"friedman":{"n":30,"p":6},"seed":4})");
  EXPECT_EQ(RunCli("simulate --config " + dir.File("cfg.json") + " --n 25 --out " + dir.File("b")),
            0);
  EXPECT_EQ(CountLines(ReadText(dir.File("b/data.csv"))), 26u);
  const auto manifest = nlohmann::json::parse(ReadText(dir.File("b/manifest.json")));
  EXPECT_EQ(manifest["config"]["seed"].get<int>(), 4);
  EXPECT_EQ(manifest["config"]["friedman"]["p"].get<int>(), 6);
  EXPECT_EQ(RunCli("explain --model " + dir.File("nowhere") + " --out " + dir.File("c")), 1);
}
#endif

}  // namespace
}  // namespace ruleshap
