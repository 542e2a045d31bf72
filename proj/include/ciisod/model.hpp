#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ciisod/backbone.hpp"
#include "ciisod/decoder.hpp"
#include "ciisod/interactors.hpp"

namespace ciisod {

struct ModelConfig {
  BackboneConfig backbone = BackboneConfig::tiny();
  InteractorConfig interactor;
  DecoderConfig decoder;

  /// ResNet-18 backbone, 64-channel RGC-dagger interactor.
  static ModelConfig full(int input_size = 352);
  /// Reduced backbone, 16-channel RGC-dagger interactor.
  static ModelConfig desk(int input_size = 64);
};

template <class T>
struct ModelFeatures {
  FeaturePyramid<T> pyramid;        // B_i
  std::vector<Tensor<T>> lateral;   // C_i
};

/// Bottom-up backbone, CII lateral connections and top-down decoder.
template <class T>
class SaliencyModel {
 public:
  SaliencyModel(const ModelConfig& cfg, std::uint64_t seed);

  /// (n, 3, H, W) -> saliency probabilities (n, 1, H, W).
  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  ModelFeatures<T> features(const Tensor<T>& x, Mode mode);

  /// Every learnable tensor and BN statistic, each storage listed once,
  /// tagged with its component.
  StateList<T> state();
  /// Learnable entries of state().
  StateList<T> parameters();
  void zero_grad();

  const ModelConfig& config() const { return cfg_; }
  Backbone<T>& backbone() { return backbone_; }
  CentralizedInteraction<T>& cii() { return cii_; }
  Decoder<T>& decoder() { return decoder_; }

 private:
  ModelConfig cfg_;
  Backbone<T> backbone_;
  CentralizedInteraction<T> cii_;
  Decoder<T> decoder_;
};

extern template class SaliencyModel<float>;
extern template class SaliencyModel<double>;

}  // namespace ciisod
