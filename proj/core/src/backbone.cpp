#include "rsad/backbone.hpp"

namespace rsad {

std::vector<int> backbone_channels(const std::string& kind) {
  if (kind == "conv4") return {64, 64, 64, 64};
  if (kind == "resnet12") return {64, 128, 256, 512};
  throw ConfigError("unknown backbone kind: " + kind);
}

int backbone_out_size(int input_size) {
  int s = input_size;
  for (int i = 0; i < 4; ++i) s /= 2;
  return s;
}

}  // namespace rsad
