#include "ciisod/backbone.hpp"

#include "ciisod/ops.hpp"

namespace ciisod {

BackboneConfig BackboneConfig::resnet18(int input_size) {
  BackboneConfig cfg;
  cfg.input_h = cfg.input_w = input_size;
  return cfg;
}

BackboneConfig BackboneConfig::tiny(int input_size) {
  BackboneConfig cfg;
  cfg.stem_channels = 16;
  cfg.stage_channels = {16, 32, 64, 128};
  cfg.blocks_per_stage = {1, 1, 1, 1};
  cfg.input_h = cfg.input_w = input_size;
  return cfg;
}

BackboneConfig BackboneConfig::resnet50(int input_size) {
  BackboneConfig cfg;
  cfg.blocks_per_stage = {3, 4, 6, 3};
  cfg.block = BlockKind::Bottleneck;
  cfg.input_h = cfg.input_w = input_size;
  return cfg;
}

std::array<int, 5> BackboneConfig::pyramid_channels() const {
  const int expansion = block == BlockKind::Bottleneck ? 4 : 1;
  return {stem_channels, stage_channels[0] * expansion, stage_channels[1] * expansion,
          stage_channels[2] * expansion, stage_channels[3] * expansion};
}

void BackboneConfig::validate() const {
  if (input_h <= 0 || input_w <= 0 || input_h % 32 != 0 || input_w % 32 != 0) {
    throw ConfigError("backbone input size " + std::to_string(input_h) + "x" +
                      std::to_string(input_w) + " is not divisible by 32");
  }
  if (stem_channels < 1) throw ConfigError("stem_channels must be positive");
  for (int i = 0; i < 4; ++i) {
    if (stage_channels[i] < 1 || blocks_per_stage[i] < 1) {
      throw ConfigError("stage channels and block counts must be positive");
    }
  }
}

template <class T>
BasicBlock<T>::BasicBlock(Initializer& init, int cin, int cout, int stride)
    : conv1(init, cin, cout, 3, stride), conv2(init, cout, cout, 3, 1, false) {
  if (stride != 1 || cin != cout) projection.emplace(init, cin, cout, 1, stride, false);
}

template <class T>
Tensor<T> BasicBlock<T>::forward(const Tensor<T>& x, Mode mode) {
  Tensor<T> y = conv2.forward(conv1.forward(x, mode), mode);
  Tensor<T> skip = projection ? projection->forward(x, mode) : x;
  return relu(add(y, skip));
}

template <class T>
void BasicBlock<T>::collect(StateList<T>& out, const std::string& prefix) {
  conv1.collect(out, prefix + ".conv1");
  conv2.collect(out, prefix + ".conv2");
  if (projection) projection->collect(out, prefix + ".projection");
}

template <class T>
Backbone<T>::Backbone(const BackboneConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  if (cfg_.block != BlockKind::Basic) {
    throw ConfigError("bottleneck backbones are supported by the accounting tools only");
  }
  Initializer init(seed);
  stem_ = ConvBnRelu<T>(init, 3, cfg_.stem_channels, 7, 2);
  int cin = cfg_.stem_channels;
  for (int s = 0; s < 4; ++s) {
    std::vector<BasicBlock<T>> blocks;
    for (int b = 0; b < cfg_.blocks_per_stage[s]; ++b) {
      const int stride = (s > 0 && b == 0) ? 2 : 1;
      blocks.emplace_back(init, cin, cfg_.stage_channels[s], stride);
      cin = cfg_.stage_channels[s];
    }
    stages_.push_back(std::move(blocks));
  }
}

template <class T>
FeaturePyramid<T> Backbone<T>::forward(const Tensor<T>& x, Mode mode) {
  const Shape& s = x.shape();
  if (s.c != 3) throw DimensionError("backbone expects 3 input channels, got " + s.str());
  if (s.h != cfg_.input_h || s.w != cfg_.input_w) {
    throw DimensionError("backbone configured for " + std::to_string(cfg_.input_h) + "x" +
                         std::to_string(cfg_.input_w) + " input, got " + s.str());
  }
  FeaturePyramid<T> pyramid;
  Tensor<T> y = stem_.forward(x, mode);
  pyramid.stages.push_back(y);
  y = maxpool2d(y, 3, 2);
  for (auto& blocks : stages_) {
    for (auto& block : blocks) y = block.forward(y, mode);
    pyramid.stages.push_back(y);
  }
  pyramid.strides.assign(kPyramidStrides.begin(), kPyramidStrides.end());
  return pyramid;
}

template <class T>
void Backbone<T>::collect(StateList<T>& out, const std::string& prefix) {
  stem_.collect(out, prefix + ".stem");
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    for (std::size_t b = 0; b < stages_[s].size(); ++b) {
      stages_[s][b].collect(out, prefix + ".res" + std::to_string(s + 1) + "." + std::to_string(b));
    }
  }
}

template struct BasicBlock<float>;
template struct BasicBlock<double>;
template class Backbone<float>;
template class Backbone<double>;

}  // namespace ciisod
