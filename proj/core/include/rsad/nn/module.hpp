#pragma once

#include <memory>
#include <string>
#include <vector>

#include "rsad/tensor.hpp"

namespace rsad::nn {

template <typename T>
struct Param {
  Tensor<T> value;
  Tensor<T> grad;

  void resize(std::vector<std::int64_t> shape) {
    value = Tensor<T>(shape);
    grad = Tensor<T>(std::move(shape));
  }
  std::int64_t size() const { return value.size(); }
};

template <typename T>
struct NamedParam {
  std::string name;
  Param<T>* param;
};

template <typename T>
struct NamedBuffer {
  std::string name;
  Tensor<T>* tensor;
};

/// Layers cache what backward needs during forward; backward accumulates
/// parameter gradients and returns the input gradient.
template <typename T>
class Module {
 public:
  virtual ~Module() = default;
  virtual Tensor<T> forward(const Tensor<T>& x) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
  virtual void collect_params(const std::string& /*prefix*/,
                              std::vector<NamedParam<T>>& /*out*/) {}
  virtual void collect_buffers(const std::string& /*prefix*/,
                               std::vector<NamedBuffer<T>>& /*out*/) {}
  virtual void set_training(bool training) { training_ = training; }
  bool training() const { return training_; }

 protected:
  bool training_ = true;
};

template <typename T>
std::vector<NamedParam<T>> all_params(Module<T>& module,
                                      const std::string& prefix = "") {
  std::vector<NamedParam<T>> out;
  module.collect_params(prefix, out);
  return out;
}

template <typename T>
void zero_grads(Module<T>& module) {
  for (auto& np : all_params(module)) np.param->grad.zero();
}

template <typename T>
std::int64_t count_params(Module<T>& module) {
  std::int64_t n = 0;
  for (auto& np : all_params(module)) n += np.param->size();
  return n;
}

inline std::string join_name(const std::string& prefix,
                             const std::string& name) {
  return prefix.empty() ? name : prefix + "." + name;
}

}  // namespace rsad::nn
