#pragma once

#include <string>
#include <vector>

#include "rsad/augment.hpp"
#include "rsad/dataset.hpp"
#include "rsad/episode.hpp"
#include "rsad/model.hpp"

namespace rsad {

/// One materialized episode: normalized CHW tensors, label-major. Prior
/// inputs share the raw inputs' augmentation draws exactly.
struct EpisodeBatch {
  EpisodeShape shape;
  TensorF support_raw, query_raw;
  TensorF support_prior, query_prior;
  std::vector<int> query_labels;
  std::string tag;
};

class EpisodeLoader {
 public:
  EpisodeLoader(const DatasetIndex* dataset, NormStats norm,
                AugmentPolicy policy, const PriorCache* priors)
      : dataset_(dataset), norm_(norm), policy_(policy), priors_(priors) {}

  EpisodeBatch load(const Episode& episode, Rng& rng, bool with_prior) const;

 private:
  const DatasetIndex* dataset_;
  NormStats norm_;
  AugmentPolicy policy_;
  const PriorCache* priors_;
};

/// Encodes support+query in one batch (shared BN statistics in train mode)
/// and runs the episodic head. keep_caches=false skips backward bookkeeping.
TensorF episode_logits(Branch& branch, const EpisodeBatch& batch,
                       bool prior_inputs, bool keep_caches);

/// Head backward followed by encoder backward for the same batch layout.
void episode_backward(Branch& branch, const EpisodeBatch& batch,
                      const TensorF& dlogits);

}  // namespace rsad
