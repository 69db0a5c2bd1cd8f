#pragma once

#include <string>

#include "rsad/backbone.hpp"
#include "rsad/checkpoint.hpp"
#include "rsad/episodic.hpp"

namespace rsad {

struct BranchSpec {
  std::string backbone = "conv4";
  int image_size = 84;
  RhsMode rhs = RhsMode::rhs;
  float tau = 10.0f;
};

/// One branch of the dual network: feature encoder plus episodic head. The
/// raw-image branch ("main") is what evaluation and export use.
struct Branch {
  BranchSpec spec;
  Encoder<float> encoder;
  EpisodicHead<float> head;

  void set_training(bool training) { encoder.net->set_training(training); }

  void collect_params(const std::string& prefix,
                      std::vector<nn::NamedParam<float>>& out) {
    encoder.net->collect_params(nn::join_name(prefix, "encoder"), out);
    head.collect_params(prefix, out);
  }

  std::int64_t parameter_count() {
    std::vector<nn::NamedParam<float>> params;
    collect_params("", params);
    std::int64_t n = 0;
    for (auto& np : params) n += np.param->size();
    return n;
  }
};

Branch build_branch(const BranchSpec& spec, Rng& rng);

void pack_branch(Branch& branch, const std::string& prefix, Checkpoint& ckpt);
void unpack_branch(Branch& branch, const std::string& prefix,
                   const Checkpoint& ckpt);

/// Writes the branch spec into checkpoint meta under the given prefix.
void write_branch_meta(const BranchSpec& spec, const std::string& prefix,
                       Checkpoint& ckpt);
BranchSpec read_branch_meta(const Checkpoint& ckpt, const std::string& prefix);

/// Loads an inference model from either an exported main-branch checkpoint
/// or a full training state (whose branch_a is taken).
Branch load_model(const std::filesystem::path& path);

}  // namespace rsad
