#pragma once

#include <vector>

#include "rsad/errors.hpp"
#include "rsad/nn/module.hpp"

namespace rsad::nn {

/// 2x2 stride-2 max pooling with floor semantics (odd trailing row/column
/// dropped). Ties resolve to the first element in scan order.
template <typename T>
class MaxPool2d : public Module<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x) override {
    if (x.ndim() != 4) throw InputError("MaxPool2d: expected 4-D input");
    in_shape_ = x.shape();
    const std::int64_t n = x.dim(0), c = x.dim(1);
    const int ih = static_cast<int>(x.dim(2)), iw = static_cast<int>(x.dim(3));
    const int oh = ih / 2, ow = iw / 2;
    Tensor<T> y({n, c, oh, ow});
    argmax_.assign(static_cast<std::size_t>(y.size()), 0);

    std::int64_t out_idx = 0;
    for (std::int64_t p = 0; p < n * c; ++p) {
      const T* plane = x.data() + p * ih * iw;
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox, ++out_idx) {
          const int sy = oy * 2, sx = ox * 2;
          std::int64_t best = static_cast<std::int64_t>(sy) * iw + sx;
          T best_v = plane[best];
          const std::int64_t cand[3] = {best + 1, best + iw, best + iw + 1};
          for (std::int64_t idx : cand) {
            if (plane[idx] > best_v) {
              best_v = plane[idx];
              best = idx;
            }
          }
          y[out_idx] = best_v;
          argmax_[static_cast<std::size_t>(out_idx)] = p * ih * iw + best;
        }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) override {
    Tensor<T> grad_in(in_shape_);
    for (std::int64_t i = 0; i < grad_out.size(); ++i)
      grad_in[argmax_[static_cast<std::size_t>(i)]] += grad_out[i];
    return grad_in;
  }

 private:
  std::vector<std::int64_t> argmax_;
  std::vector<std::int64_t> in_shape_;
};

/// (N,C,H,W) -> (N,C) spatial mean.
template <typename T>
class GlobalAvgPool : public Module<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x) override {
    if (x.ndim() != 4) throw InputError("GlobalAvgPool: expected 4-D input");
    in_shape_ = x.shape();
    const std::int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    Tensor<T> y({n, c});
    for (std::int64_t i = 0; i < n * c; ++i) {
      const T* plane = x.data() + i * hw;
      T sum = 0;
      for (std::int64_t j = 0; j < hw; ++j) sum += plane[j];
      y[i] = sum / static_cast<T>(hw);
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) override {
    Tensor<T> grad_in(in_shape_);
    const std::int64_t hw = in_shape_[2] * in_shape_[3];
    for (std::int64_t i = 0; i < grad_out.size(); ++i) {
      T g = grad_out[i] / static_cast<T>(hw);
      T* plane = grad_in.data() + i * hw;
      for (std::int64_t j = 0; j < hw; ++j) plane[j] = g;
    }
    return grad_in;
  }

 private:
  std::vector<std::int64_t> in_shape_;
};

}  // namespace rsad::nn
