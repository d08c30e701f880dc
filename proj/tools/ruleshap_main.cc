#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "ruleshap/commands.h"

namespace {

// Flags shared by every subcommand.
void AddCommonFlags(CLI::App* app, ruleshap::RunConfig& cfg, std::string& config_path,
                    bool& fast) {
  app->add_option("--seed", cfg.seed, "Random seed");
  app->add_option("--out", cfg.out_dir, "Output directory");
  app->add_option("--config", config_path, "JSON config file; flags override it");
  app->add_option("--alpha", cfg.alpha, "Credible-interval level");
  app->add_option("--iters", cfg.total_iters, "Total Gibbs iterations");
  app->add_option("--burnin", cfg.burn_in, "Burn-in iterations");
  app->add_flag("--fast", fast, "2000 iterations with 500 burn-in");
}

void AddDataFlags(CLI::App* app, ruleshap::RunConfig& cfg, bool& binary) {
  app->add_option("--input", cfg.input, "Training CSV (default: generated data)");
  app->add_option("--outcome", cfg.outcome, "Outcome column name");
  app->add_option("--n", cfg.friedman.n, "Generated rows");
  app->add_option("--p", cfg.friedman.p, "Generated features (>= 5)");
  app->add_option("--rho", cfg.friedman.rho, "Pairwise feature correlation");
  app->add_option("--sigma2", cfg.friedman.sigma2, "Noise variance");
  app->add_flag("--binary", binary, "Logistic 0/1 outcome");
}

}  // namespace

int main(int argc, char** argv) {
  ruleshap::RunConfig cfg;
  std::string config_path;
  bool fast = false;
  bool binary = false;
  bool no_interactions = false;

  CLI::App app{"Rule ensembles with horseshoe shrinkage and exact Shapley inference"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ruleshap::kVersion);

  auto* simulate = app.add_subcommand("simulate", "Write a Friedman-style dataset");
  AddCommonFlags(simulate, cfg, config_path, fast);
  AddDataFlags(simulate, cfg, binary);

  auto* fit = app.add_subcommand("fit", "Fit rules and the horseshoe posterior");
  AddCommonFlags(fit, cfg, config_path, fast);
  AddDataFlags(fit, cfg, binary);
  fit->add_option("--trees", cfg.smoothing.n_trees, "Trees per forest");
  fit->add_option("--mtry", cfg.smoothing.mtry, "Columns tried per split (0: ceil(p/3))");
  fit->add_option("--mu", cfg.smoothing.mu, "Support exponent of the rule scale");
  fit->add_option("--eta", cfg.smoothing.eta, "Depth exponent of the rule scale");
  fit->add_option("--max-depth", cfg.smoothing.max_depth, "Maximum rule depth");
  fit->add_option("--linear-scale", cfg.linear_scale, "Linear-term shrinkage multiplier");

  auto* explain = app.add_subcommand("explain", "Shapley effects with credible intervals");
  AddCommonFlags(explain, cfg, config_path, fast);
  AddDataFlags(explain, cfg, binary);
  explain->add_option("--model", cfg.model_dir, "Directory written by fit")->required();
  explain->add_option("--probes", cfg.probes, "Rows to explain (default: training rows)");
  explain->add_flag("--no-interactions", no_interactions, "Skip pairwise interactions");

  auto* report = app.add_subcommand("report", "Rejection rates and interaction counts");
  AddCommonFlags(report, cfg, config_path, fast);
  report->add_option("--effects", cfg.effects, "effects.csv from explain")->required();
  report->add_option("--interactions", cfg.interaction_csv, "interactions.csv from explain");
  report->add_option("--grouping", cfg.grouping, "CSV with feature,group rows");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  // Config file first, then command-line flags on top.
  ruleshap::RunConfig merged;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "error: cannot open config '" << config_path << "'\n";
      return 1;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      merged.ApplyJson(ss.str());
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    }
    // Re-parse so explicit flags win over the file.
    cfg = merged;
    app.clear();
    app.parse(argc, argv);
  }
  cfg.command = app.get_subcommands().front()->get_name();
  if (fast) cfg.UseFastProfile();
  if (binary) cfg.friedman.outcome_kind = ruleshap::OutcomeKind::kBinary;
  if (no_interactions) cfg.interactions = false;
  return ruleshap::RunCommand(cfg, std::cerr);
}
