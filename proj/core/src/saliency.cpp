#include "rsad/saliency.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <sstream>

#include "rsad/errors.hpp"
#include "rsad/io.hpp"

namespace rsad {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

SaliencyMap saliency_from_gray(const Image& gray, std::string source_id) {
  if (gray.channels != 1) throw InputError("saliency map must be grayscale");
  SaliencyMap map;
  map.height = gray.height;
  map.width = gray.width;
  map.source_id = std::move(source_id);
  map.values.resize(gray.pixels.size());
  for (std::size_t i = 0; i < gray.pixels.size(); ++i)
    map.values[i] = static_cast<float>(gray.pixels[i]) / 255.0f;
  return map;
}

SaliencyMap resize_map(const SaliencyMap& map, int out_h, int out_w) {
  if (map.height == out_h && map.width == out_w) return map;
  ImageF src(map.height, map.width, 1);
  src.pixels = map.values;
  ImageF resized = resize_bilinear(src, out_h, out_w);
  SaliencyMap out;
  out.height = out_h;
  out.width = out_w;
  out.source_id = map.source_id;
  out.values = std::move(resized.pixels);
  for (auto& v : out.values) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

BinaryMask binarize_map(const SaliencyMap& map, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw ConfigError("binarize threshold must lie in (0,1)");
  BinaryMask mask;
  mask.height = map.height;
  mask.width = map.width;
  mask.bits.resize(map.values.size());
  for (std::size_t i = 0; i < map.values.size(); ++i)
    mask.bits[i] = map.values[i] >= threshold ? 1 : 0;
  return mask;
}

BinaryMask or_masks(std::span<const BinaryMask> masks) {
  if (masks.empty()) throw InputError("or_masks: empty mask list");
  BinaryMask out = masks.front();
  for (std::size_t m = 1; m < masks.size(); ++m) {
    const BinaryMask& mk = masks[m];
    if (mk.height != out.height || mk.width != out.width)
      throw InputError("or_masks: mask dimensions differ");
    for (std::size_t i = 0; i < out.bits.size(); ++i)
      out.bits[i] = (out.bits[i] | mk.bits[i]) ? 1 : 0;
  }
  return out;
}

PriorImage compose_prior(const Image& image, const BinaryMask& mask,
                         PriorProvenance provenance) {
  if (mask.height != image.height || mask.width != image.width)
    throw InputError("compose_prior: mask/image dimensions differ");
  PriorImage prior;
  prior.pixels = image;
  prior.provenance = std::move(provenance);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      if (mask.at(y, x) == 0)
        for (int c = 0; c < image.channels; ++c) prior.pixels.at(y, x, c) = 0;
  return prior;
}

static std::string provider_name(const fs::path& dir) {
  fs::path p = dir;
  if (p.filename().empty()) p = p.parent_path();  // trailing slash
  return p.filename().string();
}

/// Finds a map file for image_id under a provider dir, trying the common
/// raster extensions. Returns empty path if absent.
static fs::path find_map_file(const fs::path& dir, const std::string& id) {
  static const char* kExts[] = {".png", ".jpg", ".jpeg", ".bmp"};
  for (const char* ext : kExts) {
    fs::path candidate = dir / (id + ext);
    if (fs::exists(candidate)) return candidate;
  }
  return {};
}

CacheManifest build_prior_cache(const PriorCacheRequest& request) {
  if (request.map_dirs.empty())
    throw ConfigError("prior cache needs at least one map directory");
  if (!(request.threshold > 0.0 && request.threshold < 1.0))
    throw ConfigError("binarize threshold must lie in (0,1)");

  CacheManifest manifest;
  manifest.threshold = request.threshold;
  for (const auto& dir : request.map_dirs)
    manifest.providers.push_back(provider_name(dir));

  const fs::path prior_root = request.out_dir / "priors";
  for (const fs::path& rel : list_image_files(request.images_dir)) {
    fs::path id_path = rel;
    id_path.replace_extension();
    const std::string image_id = id_path.generic_string();

    std::vector<fs::path> map_files;
    std::string missing;
    for (std::size_t p = 0; p < request.map_dirs.size(); ++p) {
      fs::path found = find_map_file(request.map_dirs[p], image_id);
      if (found.empty()) {
        missing = manifest.providers[p];
        break;
      }
      map_files.push_back(found);
    }
    if (!missing.empty()) {
      manifest.errors.push_back(
          {image_id, "missing map from provider " + missing});
      continue;
    }

    Image source = read_image(request.images_dir / rel);
    std::vector<BinaryMask> masks;
    for (std::size_t p = 0; p < map_files.size(); ++p) {
      Image gray = read_image_gray(map_files[p]);  // hard error if corrupt
      SaliencyMap map = saliency_from_gray(gray, manifest.providers[p]);
      map = resize_map(map, source.height, source.width);
      masks.push_back(binarize_map(map, request.threshold));
    }

    PriorProvenance prov{image_id, manifest.providers, request.threshold};
    PriorImage prior =
        compose_prior(source, or_masks(masks), std::move(prov));

    const fs::path rel_out = fs::path("priors") / (image_id + ".png");
    const fs::path abs_out = request.out_dir / rel_out;
    std::vector<std::uint8_t> encoded = encode_png(prior.pixels);
    const std::string hash = fnv1a64_hex(encoded);

    bool unchanged = false;
    if (fs::exists(abs_out)) {
      std::string existing = read_text(abs_out);
      unchanged = existing.size() == encoded.size() &&
                  std::equal(encoded.begin(), encoded.end(),
                             reinterpret_cast<const std::uint8_t*>(
                                 existing.data()));
    }
    if (!unchanged) atomic_write_file(abs_out, encoded);

    manifest.entries.push_back(
        {image_id, rel_out.generic_string(), manifest.providers, hash});
  }

  save_cache_manifest(manifest, request.out_dir / "manifest.ndjson");
  return manifest;
}

void save_cache_manifest(const CacheManifest& manifest, const fs::path& path) {
  std::ostringstream os;
  json header;
  header["record"] = "header";
  header["threshold"] = manifest.threshold;
  header["providers"] = manifest.providers;
  os << header.dump() << '\n';
  for (const auto& e : manifest.entries) {
    json rec;
    rec["record"] = "prior";
    rec["image"] = e.image_id;
    rec["path"] = e.prior_path;
    rec["detectors"] = e.detector_ids;
    rec["hash"] = e.content_hash;
    os << rec.dump() << '\n';
  }
  for (const auto& e : manifest.errors) {
    json rec;
    rec["record"] = "error";
    rec["image"] = e.image_id;
    rec["reason"] = e.reason;
    os << rec.dump() << '\n';
  }
  atomic_write_text(path, os.str());
}

CacheManifest load_cache_manifest(const fs::path& path) {
  CacheManifest manifest;
  for (const std::string& line : read_lines(path)) {
    if (line.empty()) continue;
    json rec = json::parse(line);
    const std::string kind = rec.at("record");
    if (kind == "header") {
      manifest.threshold = rec.at("threshold");
      manifest.providers = rec.at("providers").get<std::vector<std::string>>();
    } else if (kind == "prior") {
      manifest.entries.push_back(
          {rec.at("image"), rec.at("path"),
           rec.at("detectors").get<std::vector<std::string>>(),
           rec.at("hash")});
    } else if (kind == "error") {
      manifest.errors.push_back({rec.at("image"), rec.at("reason")});
    }
  }
  return manifest;
}

}  // namespace rsad
