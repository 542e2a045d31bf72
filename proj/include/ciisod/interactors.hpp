#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ciisod/backbone.hpp"

namespace ciisod {

enum class InteractorKind { PlainConv, RGC, RGCDagger, PPM, PPMDagger };

std::string to_string(InteractorKind kind);
InteractorKind interactor_kind_from_string(const std::string& name);

struct InteractorConfig {
  InteractorKind kind = InteractorKind::RGCDagger;
  int kernel = 3;  // PlainConv only
  int depth = 2;   // PlainConv only: number of conv layers
  bool shared = true;
  int channels = 64;
  // BN + ReLU after the last conv of the RGC fusion stack.
  bool fuse_final_activation = true;

  bool uses_successor() const {
    return kind == InteractorKind::RGCDagger || kind == InteractorKind::PPMDagger;
  }
  void validate() const;
};

/// Bin sizes of the pooled PPM branches.
inline constexpr std::array<int, 4> kPpmBins{1, 2, 3, 6};

template <class T>
struct RGCParams {
  ConvStack<T> left;   // local branch
  ConvStack<T> right;  // relative-global branch
  ConvStack<T> fuse;
  // Test hook added to the pre-sigmoid gate; +inf-like values force a gate of ones.
  T gate_bias = T(0);

  RGCParams() = default;
  RGCParams(Initializer& init, int channels, bool fuse_final_activation = true);
  void collect(StateList<T>& out, const std::string& prefix);
};

template <class T>
struct PPMParams {
  std::vector<ConvBnRelu<T>> branches;  // one 1x1 conv per bin, channels -> channels/4
  ConvBnRelu<T> fuse;                   // 3x3, 2*channels -> channels

  PPMParams() = default;
  PPMParams(Initializer& init, int channels);
  void collect(StateList<T>& out, const std::string& prefix);
};

/// G = sigmoid(GMP(r + f_R(r))) for the right-branch input r; (n, c, 1, 1).
template <class T>
Tensor<T> rgc_gate(const Tensor<T>& right_input, RGCParams<T>& params, Mode mode);

/// out = (G * L) + f_F(G * L) with L = B + f_L(B). For RGC the right input is
/// B itself; for the successor variant it is the next (coarser) stage.
template <class T>
Tensor<T> rgc_forward(const Tensor<T>& stage, const Tensor<T>& right_input,
                      RGCParams<T>& params, Mode mode);

/// Pyramid pooling: pooled branches of `source` (x itself, or the succeeding
/// stage for the dagger variant) resized to x, concatenated with x and fused.
template <class T>
Tensor<T> ppm_forward(const Tensor<T>& x, const Tensor<T>& source,
                      PPMParams<T>& params, Mode mode);

template <class T>
Tensor<T> plain_conv_forward(const Tensor<T>& x, ConvStack<T>& params, Mode mode);

/// One information interactor; a single instance serves every stage when shared.
template <class T>
struct InteractorBody {
  InteractorKind kind;
  ConvStack<T> plain;
  RGCParams<T> rgc;
  PPMParams<T> ppm;

  InteractorBody(Initializer& init, const InteractorConfig& cfg);
  /// `successor` is the next stage's projected map (or x itself at the top).
  Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& successor, Mode mode);
  void collect(StateList<T>& out, const std::string& prefix);
};

/// Lateral connections: per-stage 1x1 projections followed by the
/// interactor body, C_i = InI(f_i(B_i)).
template <class T>
class CentralizedInteraction {
 public:
  CentralizedInteraction(const InteractorConfig& cfg,
                         const std::vector<int>& stage_channels, std::uint64_t seed);

  std::vector<Tensor<T>> project_stages(const FeaturePyramid<T>& pyramid, Mode mode);
  std::vector<Tensor<T>> apply_projected(const std::vector<Tensor<T>>& projected, Mode mode);
  std::vector<Tensor<T>> apply(const FeaturePyramid<T>& pyramid, Mode mode) {
    return apply_projected(project_stages(pyramid, mode), mode);
  }

  void collect_projections(StateList<T>& out);
  void collect_body(StateList<T>& out);
  void collect(StateList<T>& out) {
    collect_projections(out);
    collect_body(out);
  }

  const InteractorConfig& config() const { return cfg_; }
  std::size_t stage_count() const { return projections_.size(); }
  InteractorBody<T>& body(std::size_t stage) { return bodies_[cfg_.shared ? 0 : stage]; }
  std::size_t body_count() const { return bodies_.size(); }

 private:
  InteractorConfig cfg_;
  std::vector<int> stage_channels_;
  std::vector<ConvBnRelu<T>> projections_;
  std::vector<InteractorBody<T>> bodies_;
};

/// Channel-mean map of the first batch item of each stage, min-max scaled to
/// 8 bits and written as `stage{i}_{tag}.pgm` (i from 1). A constant map is
/// written as uniform 128. Returns the written paths.
template <class T>
std::vector<std::filesystem::path> dump_features(const std::vector<Tensor<T>>& stages,
                                                 const std::filesystem::path& dir,
                                                 const std::string& tag);

extern template class CentralizedInteraction<float>;
extern template class CentralizedInteraction<double>;

}  // namespace ciisod
