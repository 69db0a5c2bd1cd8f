#pragma once

#include <cstdint>
#include <filesystem>

namespace rsad {

/// Background-confounded shape dataset: the class signal lives entirely in
/// the foreground object (shape family + foreground texture); backgrounds
/// are drawn from a pool shared across classes, independent of the label.
struct SynthSpec {
  int n_classes = 10;
  int images_per_class = 40;
  int image_size = 84;
  int background_pool = 8;
  double noise_stddev = 8.0;  // additive pixel noise, 0..255 scale
  std::uint64_t seed = 0;
};

struct SynthResult {
  std::filesystem::path images_dir;
  std::filesystem::path masks_dir;
  int n_images = 0;
};

/// Writes images/<class>/<img>.png plus masks/<class>/<img>.png (the exact
/// foreground mask, 0/255 grayscale) under out_dir. Deterministic in the
/// seed, including pixel content.
SynthResult generate_synthetic_dataset(const SynthSpec& spec,
                                       const std::filesystem::path& out_dir);

}  // namespace rsad
