#include "run_dir.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <ctime>

#include "rsad/io.hpp"

namespace rsad::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

static std::string utc_stamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%S", &tm);
  return std::string(buf);
}

RunContext::RunContext(const fs::path& workdir, const std::string& command,
                       std::vector<std::string> argv)
    : command_(command), argv_(std::move(argv)), started_(utc_stamp()) {
  fs::path base = workdir / "runs";
  fs::path dir = base / (started_ + "-" + command);
  for (int suffix = 1; fs::exists(dir); ++suffix)
    dir = base / (started_ + "-" + command + "-" + std::to_string(suffix));
  fs::create_directories(dir);
  dir_ = dir;
}

void RunContext::add_artifact(const fs::path& path) {
  artifacts_.push_back(path.generic_string());
}

void RunContext::add_input_hash(const std::string& name,
                                const fs::path& file) {
  std::string content = read_text(file);
  input_hashes_[name] = fnv1a64_hex(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(content.data()), content.size()));
}

void RunContext::finish() {
  json manifest;
  manifest["command"] = command_;
  manifest["argv"] = argv_;
  manifest["seed"] = seed_;
  manifest["started"] = started_;
  manifest["finished"] = utc_stamp();
  manifest["config"] = config_;
  manifest["inputs"] = input_hashes_;
  manifest["artifacts"] = artifacts_;
  std::string body = manifest.dump(2);
  manifest["content_hash"] = fnv1a64_hex(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(body.data()), body.size()));
  atomic_write_text(dir_ / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace rsad::cli
