#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rsad/errors.hpp"
#include "rsad/nn/module.hpp"

namespace rsad {

/// lr for a 1-based epoch/step index: base * gamma^(#milestones passed).
/// A milestone m takes effect from index m+1 onward.
inline double milestone_lr(double base, std::span<const int> milestones,
                           double gamma, int index) {
  double lr = base;
  for (int m : milestones)
    if (m < index) lr *= gamma;
  return lr;
}

template <typename T>
class Optimizer {
 public:
  explicit Optimizer(std::vector<nn::NamedParam<T>> params)
      : params_(std::move(params)) {}
  virtual ~Optimizer() = default;

  virtual void step(double lr) = 0;
  virtual std::string kind() const = 0;

  void zero_grad() {
    for (auto& np : params_) np.param->grad.zero();
  }

  /// Slot state (momentum/moment buffers) for checkpointing.
  virtual void collect_state(std::vector<nn::NamedBuffer<T>>& /*out*/) {}

 protected:
  std::vector<nn::NamedParam<T>> params_;
};

template <typename T>
class SgdOptimizer : public Optimizer<T> {
 public:
  SgdOptimizer(std::vector<nn::NamedParam<T>> params, double momentum,
               double weight_decay, bool nesterov)
      : Optimizer<T>(std::move(params)),
        momentum_(static_cast<T>(momentum)),
        weight_decay_(static_cast<T>(weight_decay)),
        nesterov_(nesterov) {
    for (auto& np : this->params_)
      velocity_.emplace_back(np.param->value.shape());
  }

  void step(double lr_in) override {
    const T lr = static_cast<T>(lr_in);
    for (std::size_t p = 0; p < this->params_.size(); ++p) {
      auto& param = *this->params_[p].param;
      auto& v = velocity_[p];
      for (std::int64_t i = 0; i < param.value.size(); ++i) {
        T g = param.grad[i] + weight_decay_ * param.value[i];
        v[i] = momentum_ * v[i] + g;
        T update = nesterov_ ? g + momentum_ * v[i] : v[i];
        param.value[i] -= lr * update;
      }
    }
  }

  std::string kind() const override { return "sgd"; }

  void collect_state(std::vector<nn::NamedBuffer<T>>& out) override {
    for (std::size_t p = 0; p < this->params_.size(); ++p)
      out.push_back({this->params_[p].name + ".velocity", &velocity_[p]});
  }

 private:
  T momentum_, weight_decay_;
  bool nesterov_;
  std::vector<Tensor<T>> velocity_;
};

template <typename T>
class AdamOptimizer : public Optimizer<T> {
 public:
  AdamOptimizer(std::vector<nn::NamedParam<T>> params, double weight_decay,
                bool decoupled, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : Optimizer<T>(std::move(params)),
        weight_decay_(static_cast<T>(weight_decay)),
        decoupled_(decoupled),
        beta1_(static_cast<T>(beta1)),
        beta2_(static_cast<T>(beta2)),
        eps_(static_cast<T>(eps)) {
    for (auto& np : this->params_) {
      m_.emplace_back(np.param->value.shape());
      v_.emplace_back(np.param->value.shape());
    }
    step_count_ = Tensor<T>({1});
  }

  void step(double lr_in) override {
    const T lr = static_cast<T>(lr_in);
    step_count_[0] += T(1);
    const T t = step_count_[0];
    const T bc1 = T(1) - std::pow(beta1_, t);
    const T bc2 = T(1) - std::pow(beta2_, t);
    for (std::size_t p = 0; p < this->params_.size(); ++p) {
      auto& param = *this->params_[p].param;
      for (std::int64_t i = 0; i < param.value.size(); ++i) {
        T g = param.grad[i];
        if (!decoupled_)
          g += weight_decay_ * param.value[i];
        else
          param.value[i] -= lr * weight_decay_ * param.value[i];
        m_[p][i] = beta1_ * m_[p][i] + (T(1) - beta1_) * g;
        v_[p][i] = beta2_ * v_[p][i] + (T(1) - beta2_) * g * g;
        T mhat = m_[p][i] / bc1;
        T vhat = v_[p][i] / bc2;
        param.value[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  std::string kind() const override { return decoupled_ ? "adamw" : "adam"; }

  void collect_state(std::vector<nn::NamedBuffer<T>>& out) override {
    out.push_back({"adam.step_count", &step_count_});
    for (std::size_t p = 0; p < this->params_.size(); ++p) {
      out.push_back({this->params_[p].name + ".m", &m_[p]});
      out.push_back({this->params_[p].name + ".v", &v_[p]});
    }
  }

 private:
  T weight_decay_;
  bool decoupled_;
  T beta1_, beta2_, eps_;
  std::vector<Tensor<T>> m_, v_;
  Tensor<T> step_count_;
};

template <typename T>
std::unique_ptr<Optimizer<T>> make_optimizer(
    const std::string& kind, std::vector<nn::NamedParam<T>> params,
    double weight_decay, double momentum, bool nesterov) {
  if (kind == "sgd")
    return std::make_unique<SgdOptimizer<T>>(std::move(params), momentum,
                                             weight_decay, nesterov);
  if (kind == "adam")
    return std::make_unique<AdamOptimizer<T>>(std::move(params), weight_decay,
                                              false);
  if (kind == "adamw")
    return std::make_unique<AdamOptimizer<T>>(std::move(params), weight_decay,
                                              true);
  throw ConfigError("unknown optimizer: " + kind);
}

}  // namespace rsad
