#pragma once

#include <utility>

#include "rsad/dataset.hpp"
#include "rsad/image.hpp"
#include "rsad/rng.hpp"
#include "rsad/tensor.hpp"

namespace rsad {

enum class AugmentKind { none, standard };

struct AugmentPolicy {
  AugmentKind kind = AugmentKind::none;
  int out_size = 84;
  double scale_min = 0.5;   // random-resized-crop area fraction
  double scale_max = 1.0;
  double ratio_min = 3.0 / 4.0;
  double ratio_max = 4.0 / 3.0;
  double flip_prob = 0.5;
};

AugmentPolicy standard_augment(int out_size);
AugmentPolicy eval_transform(int out_size);

/// One sampled geometric transform; applying the same draw to the raw image
/// and its prior keeps them pixel-aligned.
struct AugmentDraw {
  double y0 = 0.0;
  double x0 = 0.0;
  double region_h = 0.0;
  double region_w = 0.0;
  bool flip = false;
};

AugmentDraw identity_draw(int src_h, int src_w);
AugmentDraw draw_augment(const AugmentPolicy& policy, int src_h, int src_w,
                         Rng& rng);

ImageF apply_draw(const Image& img, const AugmentDraw& draw, int out_size);

/// Applies one shared draw to both inputs; dimensions must match.
std::pair<ImageF, ImageF> paired_augment(const Image& raw, const Image& prior,
                                         const AugmentPolicy& policy,
                                         Rng& rng);

/// HWC [0,255] float image -> normalized CHW tensor ((v/255 - mean)/std).
TensorF tensorize(const ImageF& img, const NormStats& stats);

}  // namespace rsad
