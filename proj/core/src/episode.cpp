#include "rsad/episode.hpp"

#include <sstream>

#include "rsad/errors.hpp"

namespace rsad {

Episode sample_episode(const SectionIndex& section, int way, int shot,
                       int query_per_class, Rng& rng) {
  if (way < 1 || shot < 1 || query_per_class < 1)
    throw SamplingError("episode shape must be positive");
  if (section.n_classes() < way) {
    std::ostringstream os;
    os << "cannot sample " << way << "-way episode from "
       << section.n_classes() << " classes";
    throw SamplingError(os.str());
  }

  Episode episode;
  episode.way = way;
  episode.shot = shot;
  episode.query_per_class = query_per_class;

  const int per_class = shot + query_per_class;
  std::vector<int> class_picks = rng.sample_indices(section.n_classes(), way);
  for (int label = 0; label < way; ++label) {
    const int ci = class_picks[static_cast<std::size_t>(label)];
    const auto& pool = section.instances[static_cast<std::size_t>(ci)];
    if (static_cast<int>(pool.size()) < per_class) {
      std::ostringstream os;
      os << "class " << section.classes[static_cast<std::size_t>(ci)]
         << " has " << pool.size() << " instances, episode needs "
         << per_class;
      throw SamplingError(os.str());
    }
    episode.class_map.push_back(section.classes[static_cast<std::size_t>(ci)]);
    std::vector<int> inst =
        rng.sample_indices(static_cast<int>(pool.size()), per_class);
    for (int k = 0; k < shot; ++k)
      episode.support.push_back(
          {pool[static_cast<std::size_t>(inst[static_cast<std::size_t>(k)])],
           label});
    for (int q = shot; q < per_class; ++q)
      episode.query.push_back(
          {pool[static_cast<std::size_t>(inst[static_cast<std::size_t>(q)])],
           label});
  }
  return episode;
}

}  // namespace rsad
