#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace rsad {

/// Flat `key = value` text, '#' comments. Environment variables named
/// RSAD_<KEY> (uppercased) override file values.
std::map<std::string, std::string> parse_kv_file(
    const std::filesystem::path& path);

struct TrainConfig {
  std::string stage = "episodic";  // pretrain | episodic
  std::string backbone = "conv4";  // conv4 | resnet12
  std::string data;                // dataset root (directory-per-class tree)
  std::string split_file;          // defaults to <data>/split.ndjson
  std::string priors;              // prior cache directory
  std::string out = "runs";

  std::string optimizer;  // sgd | adam | adamw; stage default when empty
  double lr = -1.0;       // stage default when negative
  double weight_decay = -1.0;
  double momentum = 0.9;
  bool nesterov = false;
  int epochs = -1;
  int batch_size = 64;
  std::vector<int> milestones;  // pretrain lr decay epochs
  double gamma = 0.1;

  long episodes = 40000;
  int way = 15;
  int shot = 5;
  int query = 15;
  int eval_way = 5;
  int eval_shot = 1;
  int eval_query = 15;
  int val_every = 500;
  int val_episodes = 200;

  double alpha = 1.0;
  double tau = 10.0;
  std::string sag = "on";         // on | off
  std::string distill = "mutual"; // mutual | ud | udp
  std::string rhs = "rhs";        // rhs | none | cross_attention
  std::string augment = "standard";  // standard | none
  std::string pretrain_input = "raw";  // raw | prior

  int image_size = 84;
  std::uint64_t seed = 1;
  int threads = 1;
  int metrics_every = 1;

  bool operator==(const TrainConfig&) const = default;
};

/// Typed, validated config: unknown keys are rejected by name, then the
/// paper's stage/backbone recipe fills any optimizer fields left unset.
TrainConfig parse_train_config(const std::map<std::string, std::string>& kv);
TrainConfig parse_train_config(const std::filesystem::path& path);

/// Resolved snapshot that re-parses to an equal config.
std::string serialize_config(const TrainConfig& config);

}  // namespace rsad
