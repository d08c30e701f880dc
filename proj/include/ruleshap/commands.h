#ifndef RULESHAP_COMMANDS_H_
#define RULESHAP_COMMANDS_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ruleshap/dataset.h"
#include "ruleshap/rulegen.h"

namespace ruleshap {

inline constexpr const char* kVersion = "1.0.0";

struct RunConfig {
  std::string command;
  std::string input;        // training CSV; empty selects generated data
  std::string outcome = "y";
  FriedmanConfig friedman;
  SmoothingConfig smoothing;
  std::size_t total_iters = 22000;
  std::size_t burn_in = 2000;
  double linear_scale = 1.0;
  double alpha = 0.05;
  std::string out_dir = "out";
  std::uint64_t seed = 1;

  // explain
  std::string model_dir;
  std::string probes;
  bool interactions = true;
  // report
  std::string effects;
  std::string interaction_csv;
  std::string grouping;

  // 2000 iterations with 500 burn-in.
  void UseFastProfile();
  void Validate() const;
  std::string ToJson() const;
  // Overlays keys present in a JSON object onto this config.
  void ApplyJson(const std::string& text);
};

// Each command writes its outputs plus manifest.json (deterministic) and
// timings.json under cfg.out_dir.
void CmdSimulate(const RunConfig& cfg);
void CmdFit(const RunConfig& cfg);
void CmdExplain(const RunConfig& cfg);
void CmdReport(const RunConfig& cfg);

// Dispatches on cfg.command and maps failures to exit codes: 0 success,
// 1 validation error, 2 numeric or other runtime error.
int RunCommand(const RunConfig& cfg, std::ostream& err);

// Training data named by the config: the CSV at `input`, else a generated
// Friedman sample.
Dataset LoadTraining(const RunConfig& cfg);

// 64-bit FNV-1a digest of a file's bytes as 16 hex digits.
std::string FileDigest(const std::string& path);

}  // namespace ruleshap

#endif  // RULESHAP_COMMANDS_H_
