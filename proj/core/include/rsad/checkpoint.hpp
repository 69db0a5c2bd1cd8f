#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "rsad/nn/module.hpp"
#include "rsad/tensor.hpp"

namespace rsad {

/// Flat map of canonical array paths plus a string-valued config header.
/// Binary format, little-endian, written atomically; round-trips bit-exact.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::map<std::string, TensorF> arrays;
};

void save_checkpoint(const Checkpoint& ckpt,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies a module's parameters and buffers into the checkpoint under
/// prefix, or restores them (shapes must match exactly).
void pack_module(nn::Module<float>& module, const std::string& prefix,
                 Checkpoint& ckpt);
void unpack_module(nn::Module<float>& module, const std::string& prefix,
                   const Checkpoint& ckpt);

}  // namespace rsad
