#include "rsad/ablation.hpp"

#include <cstdio>
#include <sstream>

#include "rsad/errors.hpp"
#include "rsad/io.hpp"

namespace rsad {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  std::size_t e = s.find_last_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

}  // namespace

AblationSpec parse_ablation_spec(const fs::path& path) {
  AblationSpec spec;
  for (const std::string& raw : read_lines(path)) {
    std::string line = raw;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("ablation line is not 'key = value': " + raw);
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));

    if (key != "variant") {
      spec.base[key] = value;
      continue;
    }
    // variant = <name> k=v k=v ...
    std::istringstream ss(value);
    AblationVariant variant;
    ss >> variant.name;
    if (variant.name.empty())
      throw ConfigError("variant line missing a name: " + raw);
    std::string tok;
    while (ss >> tok) {
      std::size_t te = tok.find('=');
      if (te == std::string::npos)
        throw ConfigError("variant override is not k=v: " + tok);
      variant.overrides[tok.substr(0, te)] = tok.substr(te + 1);
    }
    spec.variants.push_back(std::move(variant));
  }
  if (spec.variants.empty())
    throw ConfigError("ablation spec declares no variants");
  return spec;
}

std::vector<AblationResult> run_ablation(const AblationSpec& spec,
                                         const fs::path& run_dir) {
  std::vector<AblationResult> results;
  for (const auto& variant : spec.variants) {
    std::map<std::string, std::string> kv = spec.base;
    for (const auto& [k, v] : variant.overrides) kv[k] = v;
    TrainConfig config = parse_train_config(kv);

    AblationResult result;
    result.name = variant.name;
    result.config = config;
    result.train = episodic_train(config, run_dir / variant.name);

    Branch model = load_model(result.train.best_state);
    result.report = evaluate_model(
        model, scan_dataset(config.data), load_split(config.split_file),
        "novel", config.eval_way, config.eval_shot, config.eval_query,
        config.val_episodes > 0 ? config.val_episodes : 200,
        splitmix64(config.seed ^ 0xab1a7eULL));
    result.report.model_id = variant.name;
    results.push_back(std::move(result));
  }
  return results;
}

std::string ablation_table(const std::vector<AblationResult>& results) {
  std::ostringstream os;
  os << "variant            sag  rhs              alpha   acc (%)\n";
  for (const auto& r : results) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-18s %-4s %-16s %-7.2f %.2f +- %.2f\n",
                  r.name.c_str(), r.config.sag.c_str(), r.config.rhs.c_str(),
                  r.config.alpha, r.report.mean_acc_pct, r.report.ci95_pct);
    os << buf;
  }
  return os.str();
}

}  // namespace rsad
