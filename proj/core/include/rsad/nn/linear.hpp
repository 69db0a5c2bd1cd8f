#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "rsad/errors.hpp"
#include "rsad/nn/conv2d.hpp"  // RowMat/MatMap aliases
#include "rsad/nn/module.hpp"
#include "rsad/rng.hpp"

namespace rsad::nn {

template <typename T>
class Linear : public Module<T> {
 public:
  Linear(int in_features, int out_features, Rng& rng)
      : in_(in_features), out_(out_features) {
    weight_.resize({out_features, in_features});
    double stddev = std::sqrt(2.0 / static_cast<double>(out_features));
    for (std::int64_t i = 0; i < weight_.value.size(); ++i)
      weight_.value[i] = static_cast<T>(rng.normal(0.0, stddev));
    bias_.resize({out_features});
  }

  Tensor<T> forward(const Tensor<T>& x) override {
    if (x.ndim() != 2 || x.dim(1) != in_)
      throw InputError("Linear: expected (N," + std::to_string(in_) +
                       ") input");
    input_ = x;
    const std::int64_t n = x.dim(0);
    Tensor<T> y({n, out_});
    ConstMatMap<T> xm(x.data(), n, in_);
    ConstMatMap<T> w(weight_.value.data(), out_, in_);
    MatMap<T> ym(y.data(), n, out_);
    ym.noalias() = xm * w.transpose();
    ym.rowwise() += VecMap<T>(bias_.value.data(), out_).transpose();
    return y;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) override {
    const std::int64_t n = input_.dim(0);
    ConstMatMap<T> dy(grad_out.data(), n, out_);
    ConstMatMap<T> xm(input_.data(), n, in_);
    ConstMatMap<T> w(weight_.value.data(), out_, in_);
    MatMap<T>(weight_.grad.data(), out_, in_).noalias() += dy.transpose() * xm;
    VecMap<T>(bias_.grad.data(), out_) += dy.colwise().sum().transpose();
    Tensor<T> grad_in({n, in_});
    MatMap<T>(grad_in.data(), n, in_).noalias() = dy * w;
    return grad_in;
  }

  void collect_params(const std::string& prefix,
                      std::vector<NamedParam<T>>& out) override {
    out.push_back({join_name(prefix, "weight"), &weight_});
    out.push_back({join_name(prefix, "bias"), &bias_});
  }

 private:
  int in_, out_;
  Param<T> weight_, bias_;
  Tensor<T> input_;
};

}  // namespace rsad::nn
