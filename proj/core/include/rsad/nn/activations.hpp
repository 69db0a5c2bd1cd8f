#pragma once

#include "rsad/nn/module.hpp"

namespace rsad::nn {

template <typename T>
class ReLU : public Module<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x) override {
    mask_.assign(static_cast<std::size_t>(x.size()), 0);
    Tensor<T> y(x.shape());
    for (std::int64_t i = 0; i < x.size(); ++i) {
      if (x[i] > T(0)) {
        y[i] = x[i];
        mask_[static_cast<std::size_t>(i)] = 1;
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) override {
    Tensor<T> grad_in(grad_out.shape());
    for (std::int64_t i = 0; i < grad_out.size(); ++i)
      grad_in[i] = mask_[static_cast<std::size_t>(i)] ? grad_out[i] : T(0);
    return grad_in;
  }

 private:
  std::vector<std::uint8_t> mask_;
};

}  // namespace rsad::nn
