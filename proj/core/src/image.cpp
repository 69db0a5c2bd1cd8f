#include "rsad/image.hpp"

#include <algorithm>
#include <cmath>

namespace rsad {

ImageF to_float(const Image& img) {
  ImageF out(img.height, img.width, img.channels);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    out.pixels[i] = static_cast<float>(img.pixels[i]);
  return out;
}

ImageF resize_bilinear_region(const ImageF& src, double y0, double x0,
                              double region_h, double region_w, int out_h,
                              int out_w) {
  ImageF out(out_h, out_w, src.channels);
  const double sy = region_h / out_h;
  const double sx = region_w / out_w;
  for (int oy = 0; oy < out_h; ++oy) {
    double fy = y0 + (oy + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(src.height - 1));
    int iy0 = static_cast<int>(std::floor(fy));
    int iy1 = std::min(iy0 + 1, src.height - 1);
    double wy = fy - iy0;
    for (int ox = 0; ox < out_w; ++ox) {
      double fx = x0 + (ox + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(src.width - 1));
      int ix0 = static_cast<int>(std::floor(fx));
      int ix1 = std::min(ix0 + 1, src.width - 1);
      double wx = fx - ix0;
      for (int c = 0; c < src.channels; ++c) {
        double top = (1.0 - wx) * src.at(iy0, ix0, c) + wx * src.at(iy0, ix1, c);
        double bot = (1.0 - wx) * src.at(iy1, ix0, c) + wx * src.at(iy1, ix1, c);
        out.at(oy, ox, c) = static_cast<float>((1.0 - wy) * top + wy * bot);
      }
    }
  }
  return out;
}

ImageF resize_bilinear(const ImageF& src, int out_h, int out_w) {
  return resize_bilinear_region(src, 0.0, 0.0, src.height, src.width, out_h,
                                out_w);
}

Image resize_bilinear(const Image& src, int out_h, int out_w) {
  ImageF tmp = resize_bilinear(to_float(src), out_h, out_w);
  Image out(out_h, out_w, src.channels);
  for (std::size_t i = 0; i < tmp.pixels.size(); ++i)
    out.pixels[i] = static_cast<std::uint8_t>(
        std::clamp(std::lround(tmp.pixels[i]), 0L, 255L));
  return out;
}

void flip_horizontal(ImageF& img) {
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width / 2; ++x)
      for (int c = 0; c < img.channels; ++c)
        std::swap(img.at(y, x, c), img.at(y, img.width - 1 - x, c));
}

}  // namespace rsad
