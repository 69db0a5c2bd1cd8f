#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "rsad/nn/module.hpp"

namespace rsad::nn {

template <typename T>
class Sequential : public Module<T> {
 public:
  Sequential() = default;

  void add(std::string name, std::unique_ptr<Module<T>> module) {
    entries_.push_back({std::move(name), std::move(module)});
  }

  Tensor<T> forward(const Tensor<T>& x) override {
    Tensor<T> cur = x;
    for (auto& e : entries_) cur = e.module->forward(cur);
    return cur;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) override {
    Tensor<T> cur = grad_out;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it)
      cur = it->module->backward(cur);
    return cur;
  }

  void collect_params(const std::string& prefix,
                      std::vector<NamedParam<T>>& out) override {
    for (auto& e : entries_)
      e.module->collect_params(join_name(prefix, e.name), out);
  }

  void collect_buffers(const std::string& prefix,
                       std::vector<NamedBuffer<T>>& out) override {
    for (auto& e : entries_)
      e.module->collect_buffers(join_name(prefix, e.name), out);
  }

  void set_training(bool training) override {
    Module<T>::set_training(training);
    for (auto& e : entries_) e.module->set_training(training);
  }

  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    std::string name;
    std::unique_ptr<Module<T>> module;
  };
  std::vector<Entry> entries_;
};

}  // namespace rsad::nn
