#include "rsad/model.hpp"

#include "rsad/errors.hpp"

namespace rsad {

Branch build_branch(const BranchSpec& spec, Rng& rng) {
  Branch branch;
  branch.spec = spec;
  branch.encoder =
      build_backbone<float>({spec.backbone, spec.image_size}, rng);
  branch.head.init(branch.encoder.out_channels, spec.rhs, spec.tau, rng);
  return branch;
}

void pack_branch(Branch& branch, const std::string& prefix, Checkpoint& ckpt) {
  pack_module(*branch.encoder.net, nn::join_name(prefix, "encoder"), ckpt);
  std::vector<nn::NamedParam<float>> params;
  branch.head.collect_params(prefix, params);
  for (auto& np : params) ckpt.arrays[np.name] = np.param->value;
}

void unpack_branch(Branch& branch, const std::string& prefix,
                   const Checkpoint& ckpt) {
  unpack_module(*branch.encoder.net, nn::join_name(prefix, "encoder"), ckpt);
  std::vector<nn::NamedParam<float>> params;
  branch.head.collect_params(prefix, params);
  for (auto& np : params) {
    auto it = ckpt.arrays.find(np.name);
    if (it == ckpt.arrays.end())
      throw IoError("checkpoint missing array: " + np.name);
    if (it->second.shape() != np.param->value.shape())
      throw IoError("checkpoint shape mismatch for " + np.name);
    np.param->value = it->second;
  }
}

void write_branch_meta(const BranchSpec& spec, const std::string& prefix,
                       Checkpoint& ckpt) {
  ckpt.meta[nn::join_name(prefix, "backbone")] = spec.backbone;
  ckpt.meta[nn::join_name(prefix, "image_size")] =
      std::to_string(spec.image_size);
  ckpt.meta[nn::join_name(prefix, "rhs")] = to_string(spec.rhs);
  ckpt.meta[nn::join_name(prefix, "tau")] = std::to_string(spec.tau);
}

BranchSpec read_branch_meta(const Checkpoint& ckpt, const std::string& prefix) {
  auto get = [&](const std::string& key) {
    auto it = ckpt.meta.find(nn::join_name(prefix, key));
    if (it == ckpt.meta.end())
      throw IoError("checkpoint meta missing key: " + key);
    return it->second;
  };
  BranchSpec spec;
  spec.backbone = get("backbone");
  spec.image_size = std::stoi(get("image_size"));
  spec.rhs = parse_rhs_mode(get("rhs"));
  spec.tau = std::stof(get("tau"));
  return spec;
}

Branch load_model(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  std::string prefix;
  auto kind = ckpt.meta.find("kind");
  if (kind != ckpt.meta.end() && kind->second == "train_state")
    prefix = "branch_a";
  BranchSpec spec = read_branch_meta(ckpt, prefix);
  Rng rng(0);  // weights come from the checkpoint
  Branch branch = build_branch(spec, rng);
  unpack_branch(branch, prefix, ckpt);
  branch.set_training(false);
  return branch;
}

}  // namespace rsad
