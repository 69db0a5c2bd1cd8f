#pragma once

#include <memory>
#include <string>

#include "rsad/errors.hpp"
#include "rsad/nn/activations.hpp"
#include "rsad/nn/batchnorm.hpp"
#include "rsad/nn/conv2d.hpp"
#include "rsad/nn/pool.hpp"
#include "rsad/nn/sequential.hpp"
#include "rsad/rng.hpp"

namespace rsad {

struct BackboneConfig {
  std::string kind = "conv4";  // conv4 | resnet12
  int input_size = 84;
};

/// Stage widths implied by the kind: conv4 is 64 throughout, resnet12 is
/// 64-128-256-512.
std::vector<int> backbone_channels(const std::string& kind);

/// Spatial side after four 2x2 floor-poolings.
int backbone_out_size(int input_size);

/// Three 3x3 conv-BN stages (ReLU after the first two), a 1x1 projection
/// shortcut with its own BN, post-sum ReLU, then 2x2 max-pool.
template <typename T>
class ResidualBlock : public nn::Module<T> {
 public:
  ResidualBlock(int in_ch, int out_ch, Rng& rng)
      : conv1_(in_ch, out_ch, 3, 1, false, rng),
        bn1_(out_ch),
        conv2_(out_ch, out_ch, 3, 1, false, rng),
        bn2_(out_ch),
        conv3_(out_ch, out_ch, 3, 1, false, rng),
        bn3_(out_ch),
        sc_conv_(in_ch, out_ch, 1, 0, false, rng),
        sc_bn_(out_ch) {}

  Tensor<T> forward(const Tensor<T>& x) override {
    Tensor<T> a = relu1_.forward(bn1_.forward(conv1_.forward(x)));
    Tensor<T> b = relu2_.forward(bn2_.forward(conv2_.forward(a)));
    Tensor<T> main = bn3_.forward(conv3_.forward(b));
    Tensor<T> skip = sc_bn_.forward(sc_conv_.forward(x));
    for (std::int64_t i = 0; i < main.size(); ++i) main[i] += skip[i];
    return pool_.forward(relu3_.forward(main));
  }

  Tensor<T> backward(const Tensor<T>& grad_out) override {
    Tensor<T> d = relu3_.backward(pool_.backward(grad_out));
    Tensor<T> dx =
        conv1_.backward(bn1_.backward(relu1_.backward(conv2_.backward(
            bn2_.backward(relu2_.backward(conv3_.backward(bn3_.backward(d))))))));
    Tensor<T> ds = sc_conv_.backward(sc_bn_.backward(d));
    for (std::int64_t i = 0; i < dx.size(); ++i) dx[i] += ds[i];
    return dx;
  }

  void collect_params(const std::string& prefix,
                      std::vector<nn::NamedParam<T>>& out) override {
    conv1_.collect_params(nn::join_name(prefix, "conv1"), out);
    bn1_.collect_params(nn::join_name(prefix, "bn1"), out);
    conv2_.collect_params(nn::join_name(prefix, "conv2"), out);
    bn2_.collect_params(nn::join_name(prefix, "bn2"), out);
    conv3_.collect_params(nn::join_name(prefix, "conv3"), out);
    bn3_.collect_params(nn::join_name(prefix, "bn3"), out);
    sc_conv_.collect_params(nn::join_name(prefix, "shortcut"), out);
    sc_bn_.collect_params(nn::join_name(prefix, "shortcut_bn"), out);
  }

  void collect_buffers(const std::string& prefix,
                       std::vector<nn::NamedBuffer<T>>& out) override {
    bn1_.collect_buffers(nn::join_name(prefix, "bn1"), out);
    bn2_.collect_buffers(nn::join_name(prefix, "bn2"), out);
    bn3_.collect_buffers(nn::join_name(prefix, "bn3"), out);
    sc_bn_.collect_buffers(nn::join_name(prefix, "shortcut_bn"), out);
  }

  void set_training(bool training) override {
    nn::Module<T>::set_training(training);
    bn1_.set_training(training);
    bn2_.set_training(training);
    bn3_.set_training(training);
    sc_bn_.set_training(training);
  }

 private:
  nn::Conv2d<T> conv1_;
  nn::BatchNorm2d<T> bn1_;
  nn::Conv2d<T> conv2_;
  nn::BatchNorm2d<T> bn2_;
  nn::Conv2d<T> conv3_;
  nn::BatchNorm2d<T> bn3_;
  nn::Conv2d<T> sc_conv_;
  nn::BatchNorm2d<T> sc_bn_;
  nn::ReLU<T> relu1_, relu2_, relu3_;
  nn::MaxPool2d<T> pool_;
};

/// A built feature encoder: images (N,3,S,S) -> feature maps (N,C,s,s).
template <typename T>
struct Encoder {
  BackboneConfig config;
  std::unique_ptr<nn::Sequential<T>> net;
  int out_channels = 0;
  int out_size = 0;

  Tensor<T> encode(const Tensor<T>& images) {
    if (images.ndim() != 4 || images.dim(1) != 3 ||
        images.dim(2) != config.input_size ||
        images.dim(3) != config.input_size)
      throw InputError("encode: expected (N,3," +
                       std::to_string(config.input_size) + "," +
                       std::to_string(config.input_size) + ") batch");
    return net->forward(images);
  }

  Tensor<T> backward(const Tensor<T>& grad_feats) {
    return net->backward(grad_feats);
  }

  std::int64_t parameter_count() { return nn::count_params(*net); }
};

/// Width plan in the two-stage miniature style used by the gradient-check
/// tests; production kinds are conv4 and resnet12.
template <typename T>
Encoder<T> build_backbone(const BackboneConfig& config, Rng& rng,
                          int stages = 4, int width_scale = 1) {
  if (config.input_size < (1 << stages))
    throw ConfigError("backbone input size too small for " +
                      std::to_string(stages) + " poolings");
  std::vector<int> channels = backbone_channels(config.kind);
  for (auto& c : channels) c = std::max(1, c / width_scale);
  channels.resize(static_cast<std::size_t>(stages));

  Encoder<T> encoder;
  encoder.config = config;
  encoder.net = std::make_unique<nn::Sequential<T>>();
  int in_ch = 3;
  for (int s = 0; s < stages; ++s) {
    const int out_ch = channels[static_cast<std::size_t>(s)];
    const std::string name = "block" + std::to_string(s + 1);
    if (config.kind == "conv4") {
      auto block = std::make_unique<nn::Sequential<T>>();
      block->add("conv", std::make_unique<nn::Conv2d<T>>(in_ch, out_ch, 3, 1,
                                                         false, rng));
      block->add("bn", std::make_unique<nn::BatchNorm2d<T>>(out_ch));
      block->add("relu", std::make_unique<nn::ReLU<T>>());
      block->add("pool", std::make_unique<nn::MaxPool2d<T>>());
      encoder.net->add(name, std::move(block));
    } else {
      encoder.net->add(name,
                       std::make_unique<ResidualBlock<T>>(in_ch, out_ch, rng));
    }
    in_ch = out_ch;
  }
  encoder.out_channels = in_ch;
  encoder.out_size = config.input_size;
  for (int s = 0; s < stages; ++s) encoder.out_size /= 2;
  return encoder;
}

}  // namespace rsad
