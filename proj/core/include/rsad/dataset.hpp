#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rsad/image.hpp"
#include "rsad/saliency.hpp"

namespace rsad {

/// Directory-per-class image tree, classes and instances sorted by name.
struct DatasetIndex {
  std::filesystem::path root;
  std::vector<std::string> class_names;
  std::vector<std::vector<std::string>> instances;  // relative paths, with ext

  int n_classes() const { return static_cast<int>(class_names.size()); }
};

DatasetIndex scan_dataset(const std::filesystem::path& root);

struct NormStats {
  std::array<double, 3> mean{0.0, 0.0, 0.0};    // on the [0,1] pixel scale
  std::array<double, 3> stddev{1.0, 1.0, 1.0};

  bool operator==(const NormStats&) const = default;
};

struct SplitSpec {
  std::string dataset_id;
  std::uint64_t seed = 0;
  std::vector<std::string> base_classes;
  std::vector<std::string> val_classes;
  std::vector<std::string> novel_classes;
  NormStats norm;

  bool operator==(const SplitSpec& other) const = default;
};

/// Random disjoint class assignment; counts must sum to the class total.
/// Normalization statistics are computed from base-split images only.
SplitSpec make_split(const DatasetIndex& dataset, std::array<int, 3> counts,
                     std::uint64_t seed);

void save_split(const SplitSpec& split, const std::filesystem::path& path);
SplitSpec load_split(const std::filesystem::path& path);

/// Instances-per-class restriction of a dataset to one split section.
struct SectionIndex {
  std::vector<std::string> classes;
  std::vector<std::vector<std::string>> instances;

  int n_classes() const { return static_cast<int>(classes.size()); }
};

SectionIndex section_index(const DatasetIndex& dataset,
                           const std::vector<std::string>& classes);

const std::vector<std::string>& split_section(const SplitSpec& split,
                                              const std::string& name);

/// Prior-image lookup backed by a cache directory's manifest.
class PriorCache {
 public:
  PriorCache() = default;
  explicit PriorCache(const std::filesystem::path& cache_dir);

  bool has(const std::string& image_id) const;
  Image load(const std::string& image_id) const;

 private:
  std::filesystem::path root_;
  std::map<std::string, std::string> paths_;  // image id -> relative path
};

/// Strips the extension: "class_00/img_003.png" -> "class_00/img_003".
std::string instance_id(const std::string& instance_path);

}  // namespace rsad
