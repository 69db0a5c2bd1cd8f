#pragma once

#include <array>

#include "rsad/config.hpp"
#include "rsad/dataset.hpp"
#include "rsad/saliency.hpp"
#include "rsad/synth.hpp"
#include "testutil.hpp"

namespace testutil {

/// Desk-scale synthetic dataset with oracle priors and a saved split,
/// shared by the training/eval tests.
struct DeskDataset {
  TempDir tmp{"desk"};
  std::filesystem::path data, masks, priors, split_file;
  rsad::SplitSpec split;

  explicit DeskDataset(int classes = 9, int per_class = 12, int size = 32,
                       std::array<int, 3> counts = {5, 2, 2},
                       std::uint64_t seed = 3) {
    rsad::SynthSpec spec;
    spec.n_classes = classes;
    spec.images_per_class = per_class;
    spec.image_size = size;
    spec.seed = seed;
    rsad::SynthResult result =
        rsad::generate_synthetic_dataset(spec, tmp.path() / "ds");
    data = result.images_dir;
    masks = result.masks_dir;
    priors = tmp.path() / "cache";
    rsad::build_prior_cache({data, {masks}, 0.5, priors});

    rsad::DatasetIndex index = rsad::scan_dataset(data);
    split = rsad::make_split(index, counts, seed);
    split_file = tmp.path() / "split.ndjson";
    rsad::save_split(split, split_file);
  }

  rsad::TrainConfig episodic_config(const std::filesystem::path& out) const {
    std::map<std::string, std::string> kv{
        {"stage", "episodic"},
        {"backbone", "conv4"},
        {"data", data.string()},
        {"split_file", split_file.string()},
        {"priors", priors.string()},
        {"out", out.string()},
        {"image_size", "32"},
        {"episodes", "10"},
        {"way", "3"},
        {"shot", "1"},
        {"query", "2"},
        {"eval_way", "2"},
        {"eval_shot", "1"},
        {"eval_query", "2"},
        {"val_every", "5"},
        {"val_episodes", "4"},
        {"alpha", "1.0"},
        {"tau", "10.0"},
        {"augment", "none"},
        {"seed", "11"},
    };
    return rsad::parse_train_config(kv);
  }
};

}  // namespace testutil
