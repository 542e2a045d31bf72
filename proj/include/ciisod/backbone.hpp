#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ciisod/layers.hpp"

namespace ciisod {

enum class BlockKind { Basic, Bottleneck };

struct BackboneConfig {
  int stem_channels = 64;
  std::array<int, 4> stage_channels{64, 128, 256, 512};
  std::array<int, 4> blocks_per_stage{2, 2, 2, 2};
  int input_h = 352;
  int input_w = 352;
  // Bottleneck topologies are only expanded analytically by the accounting code.
  BlockKind block = BlockKind::Basic;

  static BackboneConfig resnet18(int input_size = 352);
  static BackboneConfig tiny(int input_size = 64);
  static BackboneConfig resnet50(int input_size = 352);

  /// Channel count of B_1..B_5.
  std::array<int, 5> pyramid_channels() const;
  void validate() const;
};

inline constexpr std::array<int, 5> kPyramidStrides{2, 4, 8, 16, 32};

template <class T>
struct FeaturePyramid {
  std::vector<Tensor<T>> stages;  // B_1..B_M, finest first
  std::vector<int> strides;
};

template <class T>
struct BasicBlock {
  ConvBnRelu<T> conv1;
  ConvBnRelu<T> conv2;  // no ReLU; applied after the skip sum
  std::optional<ConvBnRelu<T>> projection;

  BasicBlock(Initializer& init, int cin, int cout, int stride);
  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  void collect(StateList<T>& out, const std::string& prefix);
};

/// ResNet-topology bottom-up pathway: 7x7/2 stem, 3x3/2 max-pool and four
/// stages of basic residual blocks. B_1 is the stem output (before the pool).
template <class T>
class Backbone {
 public:
  Backbone(const BackboneConfig& cfg, std::uint64_t seed);

  FeaturePyramid<T> forward(const Tensor<T>& x, Mode mode);
  void collect(StateList<T>& out, const std::string& prefix = "backbone");
  const BackboneConfig& config() const { return cfg_; }

 private:
  BackboneConfig cfg_;
  ConvBnRelu<T> stem_;
  std::vector<std::vector<BasicBlock<T>>> stages_;
};

extern template class Backbone<float>;
extern template class Backbone<double>;

}  // namespace ciisod
