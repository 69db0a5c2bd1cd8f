#include "rsad/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "rsad/errors.hpp"
#include "rsad/image.hpp"
#include "rsad/io.hpp"
#include "rsad/rng.hpp"

namespace rsad {

namespace fs = std::filesystem;

namespace {

constexpr double kTau = 6.283185307179586;

struct Rgb {
  double r, g, b;
};

Rgb hsv_to_rgb(double h, double s, double v) {
  h = h - std::floor(h);
  double c = v * s;
  double hp = h * 6.0;
  double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  double m = v - c;
  return {r + m, g + m, b + m};
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

/// Parameters that define one class: all class-discriminative signal.
struct ClassStyle {
  int shape_kind;      // 0..7
  double hue;          // foreground base hue
  double stripe_hue;   // secondary stripe hue
  double stripe_freq;  // stripes per object radius
  double stripe_angle;
};

ClassStyle class_style(const SynthSpec& spec, int class_index) {
  Rng rng = Rng(spec.seed).child(0x636c617373ULL + class_index);
  ClassStyle style;
  style.shape_kind = class_index % 8;
  // Hues stratified over the class set so same-shape classes stay far apart
  // in color.
  style.hue = std::fmod((class_index + 0.15 * rng.uniform()) /
                            static_cast<double>(spec.n_classes),
                        1.0);
  style.stripe_hue = std::fmod(style.hue + 0.04 + rng.uniform() * 0.04, 1.0);
  style.stripe_freq = 2.0 + 2.0 * rng.uniform() + (class_index % 3);
  style.stripe_angle = rng.uniform(0.0, kTau / 2.0);
  return style;
}

/// Interior test in object coordinates (unit circumradius, pre-rotation).
bool inside_shape(int kind, double x, double y) {
  double rho = std::hypot(x, y);
  if (rho > 1.0) return false;
  double theta = std::atan2(y, x);
  auto polygon = [&](int k) {
    double sector = kTau / k;
    double a = std::fmod(theta + kTau, sector);
    double boundary = std::cos(sector / 2.0) / std::cos(a - sector / 2.0);
    return rho <= boundary;
  };
  switch (kind) {
    case 0: return polygon(3);
    case 1: return polygon(4);
    case 2: return polygon(5);
    case 3: return polygon(6);
    case 4: return rho <= 0.92;
    case 5: return rho <= 0.95 && rho >= 0.5;   // ring
    case 6: {                                   // five-point star
      double m = 0.5 + 0.5 * std::pow(0.5 + 0.5 * std::cos(5.0 * theta), 1.5);
      return rho <= m;
    }
    default:  // plus sign
      return std::fabs(x) <= 0.32 || std::fabs(y) <= 0.32;
  }
}

/// Shared background pool: texture kind chosen independently of the label.
void paint_background(Image& img, int kind, Rng& rng) {
  const int size = img.height;
  Rgb c1 = hsv_to_rgb(rng.uniform(), 0.6 + 0.35 * rng.uniform(),
                      0.55 + 0.4 * rng.uniform());
  Rgb c2 = hsv_to_rgb(rng.uniform(), 0.6 + 0.35 * rng.uniform(),
                      0.55 + 0.4 * rng.uniform());
  switch (kind % 8) {
    case 0: {  // diagonal stripes
      double period = rng.uniform(8.0, 20.0);
      double angle = rng.uniform(0.0, kTau / 2.0);
      double ca = std::cos(angle), sa = std::sin(angle);
      double phase = rng.uniform(0.0, period);
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
          double t = std::fmod((x * ca + y * sa + phase) / period, 1.0);
          const Rgb& c = (t < 0.5) ? c1 : c2;
          img.at(y, x, 0) = to_byte(255 * c.r);
          img.at(y, x, 1) = to_byte(255 * c.g);
          img.at(y, x, 2) = to_byte(255 * c.b);
        }
      break;
    }
    case 1: {  // checkerboard
      int cell = static_cast<int>(rng.uniform_int(6, 16));
      int ox = static_cast<int>(rng.uniform_int(0, cell - 1));
      int oy = static_cast<int>(rng.uniform_int(0, cell - 1));
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
          bool odd = (((x + ox) / cell) + ((y + oy) / cell)) % 2;
          const Rgb& c = odd ? c1 : c2;
          img.at(y, x, 0) = to_byte(255 * c.r);
          img.at(y, x, 1) = to_byte(255 * c.g);
          img.at(y, x, 2) = to_byte(255 * c.b);
        }
      break;
    }
    case 2: {  // two-axis sine blend
      double fx = rng.uniform(1.0, 3.0), fy = rng.uniform(1.0, 3.0);
      double px = rng.uniform(0.0, kTau), py = rng.uniform(0.0, kTau);
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
          double t = 0.25 * (2.0 + std::sin(kTau * fx * x / size + px) +
                             std::sin(kTau * fy * y / size + py));
          img.at(y, x, 0) = to_byte(255 * (c1.r * t + c2.r * (1 - t)));
          img.at(y, x, 1) = to_byte(255 * (c1.g * t + c2.g * (1 - t)));
          img.at(y, x, 2) = to_byte(255 * (c1.b * t + c2.b * (1 - t)));
        }
      break;
    }
    case 3: {  // low-frequency value noise (bilinear-upsampled color grid)
      constexpr int kGrid = 6;
      std::array<Rgb, kGrid * kGrid> grid;
      for (auto& g : grid)
        g = hsv_to_rgb(rng.uniform(), 0.5 + 0.5 * rng.uniform(),
                       0.4 + 0.6 * rng.uniform());
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
          double gy = static_cast<double>(y) / size * (kGrid - 1);
          double gx = static_cast<double>(x) / size * (kGrid - 1);
          int y0 = static_cast<int>(gy), x0 = static_cast<int>(gx);
          int y1 = std::min(y0 + 1, kGrid - 1), x1 = std::min(x0 + 1, kGrid - 1);
          double wy = gy - y0, wx = gx - x0;
          auto mix = [&](auto get) {
            return (1 - wy) * ((1 - wx) * get(grid[y0 * kGrid + x0]) +
                               wx * get(grid[y0 * kGrid + x1])) +
                   wy * ((1 - wx) * get(grid[y1 * kGrid + x0]) +
                         wx * get(grid[y1 * kGrid + x1]));
          };
          img.at(y, x, 0) = to_byte(255 * mix([](const Rgb& c) { return c.r; }));
          img.at(y, x, 1) = to_byte(255 * mix([](const Rgb& c) { return c.g; }));
          img.at(y, x, 2) = to_byte(255 * mix([](const Rgb& c) { return c.b; }));
        }
      break;
    }
    case 4: {  // radial gradient
      double cy = rng.uniform(0.2, 0.8) * size, cx = rng.uniform(0.2, 0.8) * size;
      double radius = rng.uniform(0.5, 1.0) * size;
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
          double t = std::clamp(std::hypot(x - cx, y - cy) / radius, 0.0, 1.0);
          img.at(y, x, 0) = to_byte(255 * (c1.r * (1 - t) + c2.r * t));
          img.at(y, x, 1) = to_byte(255 * (c1.g * (1 - t) + c2.g * t));
          img.at(y, x, 2) = to_byte(255 * (c1.b * (1 - t) + c2.b * t));
        }
      break;
    }
    case 5: {  // horizontal stripes
      double period = rng.uniform(6.0, 14.0);
      double phase = rng.uniform(0.0, period);
      for (int y = 0; y < size; ++y) {
        bool odd = std::fmod((y + phase) / period, 1.0) < 0.5;
        const Rgb& c = odd ? c1 : c2;
        for (int x = 0; x < size; ++x) {
          img.at(y, x, 0) = to_byte(255 * c.r);
          img.at(y, x, 1) = to_byte(255 * c.g);
          img.at(y, x, 2) = to_byte(255 * c.b);
        }
      }
      break;
    }
    case 6: {  // random color blocks
      int cells = static_cast<int>(rng.uniform_int(4, 8));
      std::vector<Rgb> colors(static_cast<std::size_t>(cells * cells));
      for (auto& c : colors)
        c = hsv_to_rgb(rng.uniform(), 0.5 + 0.5 * rng.uniform(),
                       0.45 + 0.55 * rng.uniform());
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
          int cyi = std::min(y * cells / size, cells - 1);
          int cxi = std::min(x * cells / size, cells - 1);
          const Rgb& c = colors[static_cast<std::size_t>(cyi * cells + cxi)];
          img.at(y, x, 0) = to_byte(255 * c.r);
          img.at(y, x, 1) = to_byte(255 * c.g);
          img.at(y, x, 2) = to_byte(255 * c.b);
        }
      break;
    }
    default: {  // saturated solid
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
          img.at(y, x, 0) = to_byte(255 * c1.r);
          img.at(y, x, 1) = to_byte(255 * c1.g);
          img.at(y, x, 2) = to_byte(255 * c1.b);
        }
      break;
    }
  }
}

}  // namespace

SynthResult generate_synthetic_dataset(const SynthSpec& spec,
                                       const fs::path& out_dir) {
  if (spec.n_classes < 2)
    throw ConfigError("synthetic dataset needs at least 2 classes");
  if (spec.image_size < 16)
    throw ConfigError("image_size too small for the shape family (min 16)");
  if (spec.images_per_class < 1)
    throw ConfigError("images_per_class must be positive");
  if (spec.background_pool < 1)
    throw ConfigError("background_pool must be positive");

  const int size = spec.image_size;
  SynthResult result;
  result.images_dir = out_dir / "images";
  result.masks_dir = out_dir / "masks";

  for (int cls = 0; cls < spec.n_classes; ++cls) {
    const ClassStyle style = class_style(spec, cls);
    char cls_name[32];
    std::snprintf(cls_name, sizeof(cls_name), "class_%03d", cls);
    for (int idx = 0; idx < spec.images_per_class; ++idx) {
      Rng rng = Rng(spec.seed).child(0x696d67ULL)
                    .child(static_cast<std::uint64_t>(cls) * 100000 + idx);

      Image img(size, size, 3);
      Image mask(size, size, 1);

      int bg_kind = static_cast<int>(rng.bounded(spec.background_pool));
      paint_background(img, bg_kind, rng);

      // Object pose: rotation, scale, center jitter.
      double rot = rng.uniform(0.0, kTau);
      double radius = size * rng.uniform(0.30, 0.42);
      double cy = size * (0.5 + rng.uniform(-0.08, 0.08));
      double cx = size * (0.5 + rng.uniform(-0.08, 0.08));
      double hue_jit = rng.uniform(-0.03, 0.03);
      double val_jit = rng.uniform(-0.1, 0.1);
      double stripe_phase = rng.uniform(0.0, kTau);

      Rgb fg1 = hsv_to_rgb(style.hue + hue_jit, 0.85, 0.9 + val_jit);
      Rgb fg2 = hsv_to_rgb(style.stripe_hue + hue_jit, 0.9, 0.45 + val_jit);
      double ca = std::cos(rot), sa = std::sin(rot);
      double sca = std::cos(style.stripe_angle), ssa = std::sin(style.stripe_angle);

      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
          double dx = (x - cx) / radius, dy = (y - cy) / radius;
          double ox = ca * dx + sa * dy;   // object frame
          double oy = -sa * dx + ca * dy;
          if (!inside_shape(style.shape_kind, ox, oy)) continue;
          mask.at(y, x, 0) = 255;
          double s = std::sin(style.stripe_freq * (ox * sca + oy * ssa) * kTau / 2.0 +
                              stripe_phase);
          const Rgb& c = (s >= 0.0) ? fg1 : fg2;
          img.at(y, x, 0) = to_byte(255 * c.r);
          img.at(y, x, 1) = to_byte(255 * c.g);
          img.at(y, x, 2) = to_byte(255 * c.b);
        }

      if (spec.noise_stddev > 0.0) {
        for (int y = 0; y < size; ++y)
          for (int x = 0; x < size; ++x)
            for (int c = 0; c < 3; ++c)
              img.at(y, x, c) = to_byte(img.at(y, x, c) +
                                        rng.normal(0.0, spec.noise_stddev));
      }

      char img_name[32];
      std::snprintf(img_name, sizeof(img_name), "img_%03d.png", idx);
      write_png(result.images_dir / cls_name / img_name, img);
      write_png(result.masks_dir / cls_name / img_name, mask);
      ++result.n_images;
    }
  }
  return result;
}

}  // namespace rsad
