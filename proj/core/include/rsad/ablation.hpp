#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rsad/config.hpp"
#include "rsad/eval.hpp"
#include "rsad/train.hpp"

namespace rsad {

/// One row of an ablation study: a named set of config overrides on top of
/// the spec file's base keys (e.g. "baseline sag=off rhs=none").
struct AblationVariant {
  std::string name;
  std::map<std::string, std::string> overrides;
};

struct AblationSpec {
  std::map<std::string, std::string> base;
  std::vector<AblationVariant> variants;
};

/// Base keys use the flat config syntax; each `variant = <name> k=v ...`
/// line adds one configuration.
AblationSpec parse_ablation_spec(const std::filesystem::path& path);

struct AblationResult {
  std::string name;
  TrainConfig config;
  TrainResult train;
  EvalReport report;
};

/// Trains and evaluates every variant with shared seeds (novel split, the
/// config's eval shape).
std::vector<AblationResult> run_ablation(const AblationSpec& spec,
                                         const std::filesystem::path& run_dir);

std::string ablation_table(const std::vector<AblationResult>& results);

}  // namespace rsad
