#include "rsad/augment.hpp"

#include <algorithm>
#include <cmath>

#include "rsad/errors.hpp"

namespace rsad {

AugmentPolicy standard_augment(int out_size) {
  AugmentPolicy policy;
  policy.kind = AugmentKind::standard;
  policy.out_size = out_size;
  return policy;
}

AugmentPolicy eval_transform(int out_size) {
  AugmentPolicy policy;
  policy.kind = AugmentKind::none;
  policy.out_size = out_size;
  return policy;
}

AugmentDraw identity_draw(int src_h, int src_w) {
  AugmentDraw draw;
  draw.region_h = src_h;
  draw.region_w = src_w;
  return draw;
}

AugmentDraw draw_augment(const AugmentPolicy& policy, int src_h, int src_w,
                         Rng& rng) {
  if (policy.kind == AugmentKind::none) return identity_draw(src_h, src_w);

  AugmentDraw draw;
  const double area = static_cast<double>(src_h) * src_w;
  bool found = false;
  for (int attempt = 0; attempt < 10 && !found; ++attempt) {
    double target = area * rng.uniform(policy.scale_min, policy.scale_max);
    double log_ratio =
        rng.uniform(std::log(policy.ratio_min), std::log(policy.ratio_max));
    double ratio = std::exp(log_ratio);
    int w = static_cast<int>(std::lround(std::sqrt(target * ratio)));
    int h = static_cast<int>(std::lround(std::sqrt(target / ratio)));
    if (w >= 1 && h >= 1 && w <= src_w && h <= src_h) {
      draw.y0 = static_cast<double>(rng.uniform_int(0, src_h - h));
      draw.x0 = static_cast<double>(rng.uniform_int(0, src_w - w));
      draw.region_h = h;
      draw.region_w = w;
      found = true;
    }
  }
  if (!found) {
    // Center crop of the short side.
    int side = std::min(src_h, src_w);
    draw.y0 = (src_h - side) / 2.0;
    draw.x0 = (src_w - side) / 2.0;
    draw.region_h = side;
    draw.region_w = side;
  }
  draw.flip = rng.bernoulli(policy.flip_prob);
  return draw;
}

ImageF apply_draw(const Image& img, const AugmentDraw& draw, int out_size) {
  ImageF out = resize_bilinear_region(to_float(img), draw.y0, draw.x0,
                                      draw.region_h, draw.region_w, out_size,
                                      out_size);
  if (draw.flip) flip_horizontal(out);
  return out;
}

std::pair<ImageF, ImageF> paired_augment(const Image& raw, const Image& prior,
                                         const AugmentPolicy& policy,
                                         Rng& rng) {
  if (raw.height != prior.height || raw.width != prior.width)
    throw InputError("paired_augment: raw/prior dimensions differ");
  AugmentDraw draw = draw_augment(policy, raw.height, raw.width, rng);
  return {apply_draw(raw, draw, policy.out_size),
          apply_draw(prior, draw, policy.out_size)};
}

TensorF tensorize(const ImageF& img, const NormStats& stats) {
  TensorF out({3, img.height, img.width});
  for (int c = 0; c < 3; ++c) {
    const int sc = std::min(c, img.channels - 1);
    const float mean = static_cast<float>(stats.mean[c]);
    const float inv_std = static_cast<float>(1.0 / stats.stddev[c]);
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        out.at(c, y, x) = (img.at(y, x, sc) / 255.0f - mean) * inv_std;
  }
  return out;
}

}  // namespace rsad
