#include "ciisod/model.hpp"

namespace ciisod {

ModelConfig ModelConfig::full(int input_size) {
  ModelConfig cfg;
  cfg.backbone = BackboneConfig::resnet18(input_size);
  cfg.interactor.channels = 64;
  return cfg;
}

ModelConfig ModelConfig::desk(int input_size) {
  ModelConfig cfg;
  cfg.backbone = BackboneConfig::tiny(input_size);
  cfg.interactor.channels = 16;
  return cfg;
}

namespace {
std::vector<int> to_vector(const std::array<int, 5>& a) { return {a.begin(), a.end()}; }
}  // namespace

template <class T>
SaliencyModel<T>::SaliencyModel(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      backbone_(cfg.backbone, seed),
      cii_(cfg.interactor, to_vector(cfg.backbone.pyramid_channels()), seed),
      decoder_(cfg.interactor.channels, static_cast<int>(kPyramidStrides.size()), cfg.decoder, seed) {}

template <class T>
ModelFeatures<T> SaliencyModel<T>::features(const Tensor<T>& x, Mode mode) {
  ModelFeatures<T> f;
  f.pyramid = backbone_.forward(x, mode);
  f.lateral = cii_.apply(f.pyramid, mode);
  return f;
}

template <class T>
Tensor<T> SaliencyModel<T>::forward(const Tensor<T>& x, Mode mode) {
  ModelFeatures<T> f = features(x, mode);
  return decoder_.forward(f.lateral, x.shape().h, x.shape().w, mode);
}

template <class T>
StateList<T> SaliencyModel<T>::state() {
  StateList<T> out;
  backbone_.collect(out);
  for (auto& e : out) e.component = "backbone";
  cii_.collect(out);
  decoder_.collect(out);
  return out;
}

template <class T>
StateList<T> SaliencyModel<T>::parameters() {
  StateList<T> out;
  for (auto& e : state()) {
    if (e.learnable) out.push_back(std::move(e));
  }
  return out;
}

template <class T>
void SaliencyModel<T>::zero_grad() {
  for (auto& e : parameters()) e.tensor.zero_grad();
}

template class SaliencyModel<float>;
template class SaliencyModel<double>;

}  // namespace ciisod
