#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace rsad::cli {

/// One directory per invocation under <workdir>/runs, holding the manifest
/// and every artifact the command produces.
class RunContext {
 public:
  RunContext(const std::filesystem::path& workdir, const std::string& command,
             std::vector<std::string> argv);

  const std::filesystem::path& dir() const { return dir_; }

  void set_config_snapshot(const std::string& text) { config_ = text; }
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  void add_artifact(const std::filesystem::path& path);
  void add_input_hash(const std::string& name,
                      const std::filesystem::path& file);

  /// Writes manifest.json (exactly one per run directory).
  void finish();

 private:
  std::filesystem::path dir_;
  std::string command_;
  std::vector<std::string> argv_;
  std::string config_;
  std::uint64_t seed_ = 0;
  std::string started_;
  std::vector<std::string> artifacts_;
  std::map<std::string, std::string> input_hashes_;
};

}  // namespace rsad::cli
