#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rsad/image.hpp"

namespace rsad {

/// Per-pixel foreground confidence in [0,1], same extent as its source image.
struct SaliencyMap {
  int height = 0;
  int width = 0;
  std::vector<float> values;
  std::string source_id;

  float& at(int y, int x) {
    return values[static_cast<std::size_t>(y) * width + x];
  }
  float at(int y, int x) const {
    return values[static_cast<std::size_t>(y) * width + x];
  }
};

struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;  // exactly 0 or 1

  std::uint8_t& at(int y, int x) {
    return bits[static_cast<std::size_t>(y) * width + x];
  }
  std::uint8_t at(int y, int x) const {
    return bits[static_cast<std::size_t>(y) * width + x];
  }
};

struct PriorProvenance {
  std::string image_id;
  std::vector<std::string> detector_ids;
  double threshold = 0.5;
};

/// Source image with everything outside the mask zeroed.
struct PriorImage {
  Image pixels;
  PriorProvenance provenance;
};

/// 8-bit grayscale detector output scaled to [0,1] by /255.
SaliencyMap saliency_from_gray(const Image& gray, std::string source_id);

SaliencyMap resize_map(const SaliencyMap& map, int out_h, int out_w);

/// Bit is 1 exactly where value >= threshold. Threshold must lie in (0,1).
BinaryMask binarize_map(const SaliencyMap& map, double threshold);

BinaryMask or_masks(std::span<const BinaryMask> masks);

PriorImage compose_prior(const Image& image, const BinaryMask& mask,
                         PriorProvenance provenance = {});

struct CacheEntry {
  std::string image_id;
  std::string prior_path;  // relative to the cache directory
  std::vector<std::string> detector_ids;
  std::string content_hash;
};

struct CacheFailure {
  std::string image_id;
  std::string reason;
};

struct CacheManifest {
  double threshold = 0.5;
  std::vector<std::string> providers;
  std::vector<CacheEntry> entries;
  std::vector<CacheFailure> errors;
};

struct PriorCacheRequest {
  std::filesystem::path images_dir;
  std::vector<std::filesystem::path> map_dirs;  // one per provider
  double threshold = 0.5;
  std::filesystem::path out_dir;
};

/// One prior per source image; images missing any provider's map are recorded
/// under errors and excluded. Re-runs on unchanged inputs leave the cache
/// byte-identical. A map file that exists but fails to decode is a hard error.
CacheManifest build_prior_cache(const PriorCacheRequest& request);

void save_cache_manifest(const CacheManifest& manifest,
                         const std::filesystem::path& path);
CacheManifest load_cache_manifest(const std::filesystem::path& path);

}  // namespace rsad
