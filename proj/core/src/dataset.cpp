#include "rsad/dataset.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "rsad/errors.hpp"
#include "rsad/io.hpp"
#include "rsad/rng.hpp"

namespace rsad {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

DatasetIndex scan_dataset(const fs::path& root) {
  if (!fs::exists(root)) throw IoError("no such dataset root: " + root.string());
  DatasetIndex index;
  index.root = root;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory())
      index.class_names.push_back(entry.path().filename().string());
  }
  std::sort(index.class_names.begin(), index.class_names.end());
  index.instances.resize(index.class_names.size());
  for (std::size_t c = 0; c < index.class_names.size(); ++c) {
    for (const fs::path& rel : list_image_files(root / index.class_names[c]))
      index.instances[c].push_back(
          (fs::path(index.class_names[c]) / rel).generic_string());
    std::sort(index.instances[c].begin(), index.instances[c].end());
  }
  return index;
}

static NormStats compute_norm_stats(const DatasetIndex& dataset,
                                    const std::vector<std::string>& classes) {
  // Deterministic subsample cap keeps split creation cheap on large corpora.
  constexpr std::size_t kMaxImages = 512;
  std::vector<std::string> paths;
  std::map<std::string, std::size_t> class_pos;
  for (std::size_t c = 0; c < dataset.class_names.size(); ++c)
    class_pos[dataset.class_names[c]] = c;
  for (const auto& cls : classes) {
    auto it = class_pos.find(cls);
    if (it == class_pos.end())
      throw InputError("split names unknown class: " + cls);
    for (const auto& inst : dataset.instances[it->second])
      paths.push_back(inst);
  }
  std::sort(paths.begin(), paths.end());
  std::size_t stride = std::max<std::size_t>(1, paths.size() / kMaxImages);

  std::array<double, 3> sum{}, sumsq{};
  double count = 0.0;
  for (std::size_t i = 0; i < paths.size(); i += stride) {
    Image img = read_image(dataset.root / paths[i]);
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        for (int c = 0; c < 3; ++c) {
          double v = img.at(y, x, std::min(c, img.channels - 1)) / 255.0;
          sum[c] += v;
          sumsq[c] += v * v;
        }
    count += static_cast<double>(img.height) * img.width;
  }
  NormStats stats;
  if (count > 0) {
    for (int c = 0; c < 3; ++c) {
      stats.mean[c] = sum[c] / count;
      double var = std::max(sumsq[c] / count - stats.mean[c] * stats.mean[c],
                            1e-8);
      stats.stddev[c] = std::sqrt(var);
    }
  }
  return stats;
}

SplitSpec make_split(const DatasetIndex& dataset, std::array<int, 3> counts,
                     std::uint64_t seed) {
  const int total = counts[0] + counts[1] + counts[2];
  if (total != dataset.n_classes()) {
    std::ostringstream os;
    os << "split counts sum to " << total << " but dataset has "
       << dataset.n_classes() << " classes";
    throw ConfigError(os.str());
  }
  std::vector<std::string> shuffled = dataset.class_names;
  Rng rng = Rng(seed).child(0x73706c6974ULL);  // "split"
  rng.shuffle(std::span<std::string>(shuffled));

  SplitSpec split;
  split.dataset_id = dataset.root.generic_string();
  split.seed = seed;
  split.base_classes.assign(shuffled.begin(), shuffled.begin() + counts[0]);
  split.val_classes.assign(shuffled.begin() + counts[0],
                           shuffled.begin() + counts[0] + counts[1]);
  split.novel_classes.assign(shuffled.begin() + counts[0] + counts[1],
                             shuffled.end());
  std::sort(split.base_classes.begin(), split.base_classes.end());
  std::sort(split.val_classes.begin(), split.val_classes.end());
  std::sort(split.novel_classes.begin(), split.novel_classes.end());
  split.norm = compute_norm_stats(dataset, split.base_classes);
  return split;
}

void save_split(const SplitSpec& split, const fs::path& path) {
  std::ostringstream os;
  json header;
  header["record"] = "header";
  header["dataset"] = split.dataset_id;
  header["seed"] = split.seed;
  header["norm_mean"] = split.norm.mean;
  header["norm_std"] = split.norm.stddev;
  os << header.dump() << '\n';
  auto section = [&os](const char* name, const std::vector<std::string>& cls) {
    json rec;
    rec["record"] = "section";
    rec["name"] = name;
    rec["classes"] = cls;
    os << rec.dump() << '\n';
  };
  section("base", split.base_classes);
  section("val", split.val_classes);
  section("novel", split.novel_classes);
  atomic_write_text(path, os.str());
}

SplitSpec load_split(const fs::path& path) {
  SplitSpec split;
  for (const std::string& line : read_lines(path)) {
    if (line.empty()) continue;
    json rec = json::parse(line);
    const std::string kind = rec.at("record");
    if (kind == "header") {
      split.dataset_id = rec.at("dataset");
      split.seed = rec.at("seed");
      auto mean = rec.at("norm_mean").get<std::vector<double>>();
      auto stddev = rec.at("norm_std").get<std::vector<double>>();
      for (int c = 0; c < 3; ++c) {
        split.norm.mean[c] = mean.at(c);
        split.norm.stddev[c] = stddev.at(c);
      }
    } else if (kind == "section") {
      auto classes = rec.at("classes").get<std::vector<std::string>>();
      const std::string name = rec.at("name");
      if (name == "base")
        split.base_classes = std::move(classes);
      else if (name == "val")
        split.val_classes = std::move(classes);
      else if (name == "novel")
        split.novel_classes = std::move(classes);
      else
        throw InputError("unknown split section: " + name);
    }
  }
  return split;
}

SectionIndex section_index(const DatasetIndex& dataset,
                           const std::vector<std::string>& classes) {
  SectionIndex section;
  std::map<std::string, std::size_t> class_pos;
  for (std::size_t c = 0; c < dataset.class_names.size(); ++c)
    class_pos[dataset.class_names[c]] = c;
  for (const auto& cls : classes) {
    auto it = class_pos.find(cls);
    if (it == class_pos.end())
      throw InputError("split names unknown class: " + cls);
    section.classes.push_back(cls);
    section.instances.push_back(dataset.instances[it->second]);
  }
  return section;
}

const std::vector<std::string>& split_section(const SplitSpec& split,
                                              const std::string& name) {
  if (name == "base") return split.base_classes;
  if (name == "val") return split.val_classes;
  if (name == "novel") return split.novel_classes;
  throw ConfigError("unknown split section: " + name);
}

PriorCache::PriorCache(const fs::path& cache_dir) : root_(cache_dir) {
  CacheManifest manifest = load_cache_manifest(cache_dir / "manifest.ndjson");
  for (const auto& entry : manifest.entries)
    paths_[entry.image_id] = entry.prior_path;
}

bool PriorCache::has(const std::string& image_id) const {
  return paths_.count(image_id) > 0;
}

Image PriorCache::load(const std::string& image_id) const {
  auto it = paths_.find(image_id);
  if (it == paths_.end())
    throw InputError("no prior cached for image: " + image_id);
  return read_image(root_ / it->second);
}

std::string instance_id(const std::string& instance_path) {
  fs::path p(instance_path);
  p.replace_extension();
  return p.generic_string();
}

}  // namespace rsad
