#include "rsad/loader.hpp"

#include <cstring>
#include <sstream>

#include "rsad/errors.hpp"
#include "rsad/io.hpp"

namespace rsad {

namespace {

void copy_slab(TensorF& batch, std::int64_t index, const TensorF& chw) {
  std::memcpy(batch.data() + index * chw.size(), chw.data(),
              static_cast<std::size_t>(chw.size()) * sizeof(float));
}

}  // namespace

EpisodeBatch EpisodeLoader::load(const Episode& episode, Rng& rng,
                                 bool with_prior) const {
  if (with_prior && priors_ == nullptr)
    throw ConfigError("episode loader has no prior cache configured");

  EpisodeBatch batch;
  batch.shape = {episode.way, episode.shot, episode.query_per_class};
  const int out = policy_.out_size;

  auto fill = [&](const std::vector<EpisodeItem>& items, TensorF& raw_out,
                  TensorF& prior_out) {
    const std::int64_t n = static_cast<std::int64_t>(items.size());
    raw_out = TensorF({n, 3, out, out});
    if (with_prior) prior_out = TensorF({n, 3, out, out});
    for (std::int64_t i = 0; i < n; ++i) {
      const auto& item = items[static_cast<std::size_t>(i)];
      Image img = read_image(dataset_->root / item.instance);
      if (with_prior) {
        Image prior = priors_->load(instance_id(item.instance));
        auto [araw, aprior] = paired_augment(img, prior, policy_, rng);
        copy_slab(raw_out, i, tensorize(araw, norm_));
        copy_slab(prior_out, i, tensorize(aprior, norm_));
      } else {
        AugmentDraw draw = draw_augment(policy_, img.height, img.width, rng);
        copy_slab(raw_out, i, tensorize(apply_draw(img, draw, out), norm_));
      }
    }
  };
  fill(episode.support, batch.support_raw, batch.support_prior);
  fill(episode.query, batch.query_raw, batch.query_prior);

  batch.query_labels.reserve(episode.query.size());
  for (const auto& item : episode.query) batch.query_labels.push_back(item.label);

  std::ostringstream tag;
  tag << episode.way << "w" << episode.shot << "s[";
  for (std::size_t c = 0; c < episode.class_map.size(); ++c)
    tag << (c ? "," : "") << episode.class_map[c];
  tag << "]";
  batch.tag = tag.str();
  return batch;
}

namespace {

TensorF concat_batches(const TensorF& a, const TensorF& b) {
  TensorF out({a.dim(0) + b.dim(0), a.dim(1), a.dim(2), a.dim(3)});
  std::memcpy(out.data(), a.data(),
              static_cast<std::size_t>(a.size()) * sizeof(float));
  std::memcpy(out.data() + a.size(), b.data(),
              static_cast<std::size_t>(b.size()) * sizeof(float));
  return out;
}

}  // namespace

TensorF episode_logits(Branch& branch, const EpisodeBatch& batch,
                       bool prior_inputs, bool keep_caches) {
  const TensorF& sup = prior_inputs ? batch.support_prior : batch.support_raw;
  const TensorF& qry = prior_inputs ? batch.query_prior : batch.query_raw;
  if (sup.empty() || qry.empty())
    throw InputError("episode batch missing requested inputs");

  TensorF feats = branch.encoder.encode(concat_batches(sup, qry));
  const std::int64_t ns = sup.dim(0), nq = qry.dim(0);
  const std::int64_t per = feats.size() / (ns + nq);
  TensorF fsup({ns, feats.dim(1), feats.dim(2), feats.dim(3)});
  TensorF fqry({nq, feats.dim(1), feats.dim(2), feats.dim(3)});
  std::memcpy(fsup.data(), feats.data(),
              static_cast<std::size_t>(ns * per) * sizeof(float));
  std::memcpy(fqry.data(), feats.data() + ns * per,
              static_cast<std::size_t>(nq * per) * sizeof(float));
  return branch.head.forward(fsup, fqry, batch.shape, keep_caches);
}

void episode_backward(Branch& branch, const EpisodeBatch& batch,
                      const TensorF& dlogits) {
  auto [dsup, dqry] = branch.head.backward(dlogits);
  branch.encoder.backward(concat_batches(dsup, dqry));
}

}  // namespace rsad
