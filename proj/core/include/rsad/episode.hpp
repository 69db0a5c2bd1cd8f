#pragma once

#include <string>
#include <vector>

#include "rsad/dataset.hpp"
#include "rsad/rng.hpp"

namespace rsad {

struct EpisodeItem {
  std::string instance;  // dataset-relative path
  int label = 0;         // episode label in 0..N-1
};

/// One N-way K-shot task. Items are grouped by episode label: support holds
/// K consecutive items per label, query holds Q.
struct Episode {
  int way = 0;
  int shot = 0;
  int query_per_class = 0;
  std::vector<EpisodeItem> support;
  std::vector<EpisodeItem> query;
  std::vector<std::string> class_map;  // episode label -> class name
};

/// Classes uniform without replacement, then K+Q instances uniform without
/// replacement within each class; first K go to support.
Episode sample_episode(const SectionIndex& section, int way, int shot,
                       int query_per_class, Rng& rng);

}  // namespace rsad
