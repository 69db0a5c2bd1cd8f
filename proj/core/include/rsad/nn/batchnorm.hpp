#pragma once

#include <cmath>
#include <vector>

#include "rsad/errors.hpp"
#include "rsad/nn/module.hpp"

namespace rsad::nn {

/// Per-channel batch normalization over (N,H,W). Running statistics update
/// only in training mode; eval mode normalizes with the stored ones.
template <typename T>
class BatchNorm2d : public Module<T> {
 public:
  explicit BatchNorm2d(int channels, T eps = T(1e-5), T momentum = T(0.1))
      : channels_(channels), eps_(eps), momentum_(momentum) {
    gamma_.resize({channels});
    beta_.resize({channels});
    gamma_.value.fill(T(1));
    running_mean_ = Tensor<T>({channels});
    running_var_ = Tensor<T>({channels});
    running_var_.fill(T(1));
  }

  Tensor<T> forward(const Tensor<T>& x) override {
    if (x.ndim() != 4 || x.dim(1) != channels_)
      throw InputError("BatchNorm2d: channel mismatch");
    input_ = x;
    const std::int64_t n = x.dim(0), hw = x.dim(2) * x.dim(3);
    const std::int64_t m = n * hw;
    mean_.assign(static_cast<std::size_t>(channels_), T(0));
    inv_std_.assign(static_cast<std::size_t>(channels_), T(0));

    Tensor<T> y(x.shape());
    for (int c = 0; c < channels_; ++c) {
      T mean, var;
      if (this->training()) {
        T sum = 0, sumsq = 0;
        for (std::int64_t i = 0; i < n; ++i) {
          const T* p = plane(x, i, c, hw);
          for (std::int64_t j = 0; j < hw; ++j) {
            sum += p[j];
            sumsq += p[j] * p[j];
          }
        }
        mean = sum / static_cast<T>(m);
        var = sumsq / static_cast<T>(m) - mean * mean;
        if (var < T(0)) var = T(0);
        running_mean_[c] =
            (T(1) - momentum_) * running_mean_[c] + momentum_ * mean;
        running_var_[c] = (T(1) - momentum_) * running_var_[c] + momentum_ * var;
      } else {
        mean = running_mean_[c];
        var = running_var_[c];
      }
      const T inv_std = T(1) / std::sqrt(var + eps_);
      mean_[static_cast<std::size_t>(c)] = mean;
      inv_std_[static_cast<std::size_t>(c)] = inv_std;
      const T g = gamma_.value[c], b = beta_.value[c];
      for (std::int64_t i = 0; i < n; ++i) {
        const T* p = plane(x, i, c, hw);
        T* q = plane(y, i, c, hw);
        for (std::int64_t j = 0; j < hw; ++j)
          q[j] = g * (p[j] - mean) * inv_std + b;
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) override {
    const Tensor<T>& x = input_;
    const std::int64_t n = x.dim(0), hw = x.dim(2) * x.dim(3);
    const std::int64_t m = n * hw;
    Tensor<T> grad_in(x.shape());

    for (int c = 0; c < channels_; ++c) {
      const T mean = mean_[static_cast<std::size_t>(c)];
      const T inv_std = inv_std_[static_cast<std::size_t>(c)];
      const T g = gamma_.value[c];

      T sum_dy = 0, sum_dy_xhat = 0;
      for (std::int64_t i = 0; i < n; ++i) {
        const T* dy = plane(grad_out, i, c, hw);
        const T* p = plane(x, i, c, hw);
        for (std::int64_t j = 0; j < hw; ++j) {
          sum_dy += dy[j];
          sum_dy_xhat += dy[j] * (p[j] - mean) * inv_std;
        }
      }
      gamma_.grad[c] += sum_dy_xhat;
      beta_.grad[c] += sum_dy;

      if (this->training()) {
        const T inv_m = T(1) / static_cast<T>(m);
        for (std::int64_t i = 0; i < n; ++i) {
          const T* dy = plane(grad_out, i, c, hw);
          const T* p = plane(x, i, c, hw);
          T* dx = plane(grad_in, i, c, hw);
          for (std::int64_t j = 0; j < hw; ++j) {
            const T xhat = (p[j] - mean) * inv_std;
            dx[j] = g * inv_std *
                    (dy[j] - inv_m * sum_dy - xhat * inv_m * sum_dy_xhat);
          }
        }
      } else {
        for (std::int64_t i = 0; i < n; ++i) {
          const T* dy = plane(grad_out, i, c, hw);
          T* dx = plane(grad_in, i, c, hw);
          for (std::int64_t j = 0; j < hw; ++j) dx[j] = dy[j] * g * inv_std;
        }
      }
    }
    return grad_in;
  }

  void collect_params(const std::string& prefix,
                      std::vector<NamedParam<T>>& out) override {
    out.push_back({join_name(prefix, "gamma"), &gamma_});
    out.push_back({join_name(prefix, "beta"), &beta_});
  }

  void collect_buffers(const std::string& prefix,
                       std::vector<NamedBuffer<T>>& out) override {
    out.push_back({join_name(prefix, "running_mean"), &running_mean_});
    out.push_back({join_name(prefix, "running_var"), &running_var_});
  }

  const Tensor<T>& running_mean() const { return running_mean_; }
  const Tensor<T>& running_var() const { return running_var_; }

 private:
  static T* plane(Tensor<T>& t, std::int64_t i, int c, std::int64_t hw) {
    return t.data() + (i * t.dim(1) + c) * hw;
  }
  static const T* plane(const Tensor<T>& t, std::int64_t i, int c,
                        std::int64_t hw) {
    return t.data() + (i * t.dim(1) + c) * hw;
  }

  int channels_;
  T eps_, momentum_;
  Param<T> gamma_, beta_;
  Tensor<T> running_mean_, running_var_;
  Tensor<T> input_;
  std::vector<T> mean_, inv_std_;
};

}  // namespace rsad::nn
