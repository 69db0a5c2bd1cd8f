#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "rsad/errors.hpp"
#include "rsad/nn/module.hpp"
#include "rsad/rng.hpp"

namespace rsad::nn {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using VecMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;

/// Stride-1 2-D convolution via im2col + GEMM. Weight (O, C, k, k); the
/// column buffer is (C*k*k, OH*OW) so each row is a contiguous shift of an
/// input row.
template <typename T>
class Conv2d : public Module<T> {
 public:
  Conv2d(int in_ch, int out_ch, int ksize, int pad, bool with_bias, Rng& rng)
      : in_ch_(in_ch), out_ch_(out_ch), ksize_(ksize), pad_(pad),
        with_bias_(with_bias) {
    weight_.resize({out_ch, in_ch, ksize, ksize});
    double stddev = std::sqrt(2.0 / (static_cast<double>(out_ch) * ksize * ksize));
    for (std::int64_t i = 0; i < weight_.value.size(); ++i)
      weight_.value[i] = static_cast<T>(rng.normal(0.0, stddev));
    if (with_bias_) bias_.resize({out_ch});
  }

  Tensor<T> forward(const Tensor<T>& x) override {
    check_input(x);
    input_ = x;
    const std::int64_t n = x.dim(0);
    const int oh = out_extent(static_cast<int>(x.dim(2)));
    const int ow = out_extent(static_cast<int>(x.dim(3)));
    const std::int64_t patch = static_cast<std::int64_t>(in_ch_) * ksize_ * ksize_;
    const std::int64_t positions = static_cast<std::int64_t>(oh) * ow;

    Tensor<T> y({n, out_ch_, oh, ow});
    Tensor<T> cols({patch, positions});
    ConstMatMap<T> w(weight_.value.data(), out_ch_, patch);
    for (std::int64_t i = 0; i < n; ++i) {
      const T* xi = x.data() + i * in_ch_ * x.dim(2) * x.dim(3);
      im2col(xi, static_cast<int>(x.dim(2)), static_cast<int>(x.dim(3)), oh,
             ow, cols.data());
      MatMap<T> yi(y.data() + i * out_ch_ * positions, out_ch_, positions);
      ConstMatMap<T> cm(cols.data(), patch, positions);
      yi.noalias() = w * cm;
      if (with_bias_)
        yi.colwise() += VecMap<T>(bias_.value.data(), out_ch_);
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) override {
    const Tensor<T>& x = input_;
    const std::int64_t n = x.dim(0);
    const int ih = static_cast<int>(x.dim(2));
    const int iw = static_cast<int>(x.dim(3));
    const int oh = static_cast<int>(grad_out.dim(2));
    const int ow = static_cast<int>(grad_out.dim(3));
    const std::int64_t patch = static_cast<std::int64_t>(in_ch_) * ksize_ * ksize_;
    const std::int64_t positions = static_cast<std::int64_t>(oh) * ow;

    Tensor<T> grad_in(x.shape());
    Tensor<T> cols({patch, positions});
    Tensor<T> col_grad({patch, positions});
    MatMap<T> dw(weight_.grad.data(), out_ch_, patch);
    ConstMatMap<T> w(weight_.value.data(), out_ch_, patch);
    for (std::int64_t i = 0; i < n; ++i) {
      ConstMatMap<T> dyi(grad_out.data() + i * out_ch_ * positions, out_ch_,
                         positions);
      const T* xi = x.data() + i * in_ch_ * ih * iw;
      im2col(xi, ih, iw, oh, ow, cols.data());
      ConstMatMap<T> cm(cols.data(), patch, positions);
      dw.noalias() += dyi * cm.transpose();
      if (with_bias_)
        VecMap<T>(bias_.grad.data(), out_ch_) += dyi.rowwise().sum();
      MatMap<T> cg(col_grad.data(), patch, positions);
      cg.noalias() = w.transpose() * dyi;
      col2im(col_grad.data(), ih, iw, oh, ow,
             grad_in.data() + i * in_ch_ * ih * iw);
    }
    return grad_in;
  }

  void collect_params(const std::string& prefix,
                      std::vector<NamedParam<T>>& out) override {
    out.push_back({join_name(prefix, "weight"), &weight_});
    if (with_bias_) out.push_back({join_name(prefix, "bias"), &bias_});
  }

  int out_extent(int in) const { return in + 2 * pad_ - ksize_ + 1; }
  int out_channels() const { return out_ch_; }

 private:
  void check_input(const Tensor<T>& x) const {
    if (x.ndim() != 4 || x.dim(1) != in_ch_)
      throw InputError("Conv2d: expected (N," + std::to_string(in_ch_) +
                       ",H,W) input");
  }

  void im2col(const T* x, int ih, int iw, int oh, int ow, T* cols) const {
    const std::int64_t positions = static_cast<std::int64_t>(oh) * ow;
    std::int64_t row = 0;
    for (int c = 0; c < in_ch_; ++c) {
      const T* plane = x + static_cast<std::int64_t>(c) * ih * iw;
      for (int ky = 0; ky < ksize_; ++ky)
        for (int kx = 0; kx < ksize_; ++kx, ++row) {
          T* dst = cols + row * positions;
          for (int oy = 0; oy < oh; ++oy) {
            const int sy = oy + ky - pad_;
            T* out_row = dst + static_cast<std::int64_t>(oy) * ow;
            if (sy < 0 || sy >= ih) {
              std::fill(out_row, out_row + ow, T(0));
              continue;
            }
            const T* src_row = plane + static_cast<std::int64_t>(sy) * iw;
            // Valid x-range of the shifted copy: sx = ox + kx - pad in [0,iw)
            const int x_lo = std::max(0, pad_ - kx);
            const int x_hi = std::min(ow, iw + pad_ - kx);
            for (int ox = 0; ox < x_lo; ++ox) out_row[ox] = T(0);
            for (int ox = x_lo; ox < x_hi; ++ox)
              out_row[ox] = src_row[ox + kx - pad_];
            for (int ox = x_hi; ox < ow; ++ox) out_row[ox] = T(0);
          }
        }
    }
  }

  void col2im(const T* cols, int ih, int iw, int oh, int ow, T* grad) const {
    const std::int64_t positions = static_cast<std::int64_t>(oh) * ow;
    std::int64_t row = 0;
    for (int c = 0; c < in_ch_; ++c) {
      T* plane = grad + static_cast<std::int64_t>(c) * ih * iw;
      for (int ky = 0; ky < ksize_; ++ky)
        for (int kx = 0; kx < ksize_; ++kx, ++row) {
          const T* src = cols + row * positions;
          for (int oy = 0; oy < oh; ++oy) {
            const int sy = oy + ky - pad_;
            if (sy < 0 || sy >= ih) continue;
            T* dst_row = plane + static_cast<std::int64_t>(sy) * iw;
            const T* src_row = src + static_cast<std::int64_t>(oy) * ow;
            const int x_lo = std::max(0, pad_ - kx);
            const int x_hi = std::min(ow, iw + pad_ - kx);
            for (int ox = x_lo; ox < x_hi; ++ox)
              dst_row[ox + kx - pad_] += src_row[ox];
          }
        }
    }
  }

  int in_ch_, out_ch_, ksize_, pad_;
  bool with_bias_;
  Param<T> weight_, bias_;
  Tensor<T> input_;
};

}  // namespace rsad::nn
