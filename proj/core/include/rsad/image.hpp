#pragma once

#include <cstdint>
#include <vector>

namespace rsad {

/// 8-bit image, HWC interleaved, RGB channel order for 3-channel images.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int h, int w, int c)
      : height(h),
        width(w),
        channels(c),
        pixels(static_cast<std::size_t>(h) * w * c, 0) {}

  std::uint8_t& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool empty() const { return pixels.empty(); }
};

/// Float image, HWC interleaved; the augmentation pipeline's working type.
struct ImageF {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> pixels;

  ImageF() = default;
  ImageF(int h, int w, int c)
      : height(h),
        width(w),
        channels(c),
        pixels(static_cast<std::size_t>(h) * w * c, 0.f) {}

  float& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

ImageF to_float(const Image& img);

/// Bilinear resample of a rectangular region (half-pixel center convention).
/// The region is given in source pixels; out gets out_h x out_w.
ImageF resize_bilinear_region(const ImageF& src, double y0, double x0,
                              double region_h, double region_w, int out_h,
                              int out_w);

ImageF resize_bilinear(const ImageF& src, int out_h, int out_w);
Image resize_bilinear(const Image& src, int out_h, int out_w);

void flip_horizontal(ImageF& img);

}  // namespace rsad
