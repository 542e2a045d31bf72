#pragma once

#include <cstdint>
#include <string>

#include "ciisod/model.hpp"

namespace ciisod {

struct ParamCount {
  std::int64_t backbone = 0;
  std::int64_t projections = 0;
  std::int64_t body = 0;  // interactor bodies, counted once when shared
  std::int64_t decoder = 0;
  std::int64_t head = 0;

  std::int64_t total() const { return backbone + projections + body + decoder + head; }
  /// Everything outside the backbone.
  std::int64_t extras() const { return total() - backbone; }
};

/// Closed-form count from the configuration alone. Handles bottleneck
/// backbones, which the model itself cannot build.
ParamCount count_params(const ModelConfig& cfg);

/// Count of the learnable storages of a built model.
template <class T>
ParamCount count_params(SaliencyModel<T>& model);

/// Learnable parameters of one interactor body.
std::int64_t interactor_body_params(const InteractorConfig& cfg);

/// Multiply-accumulates of a k x k convolution producing oh x ow outputs.
std::int64_t conv_macs(int cin, int cout, int kernel, int oh, int ow);
/// 2 * conv_macs: one multiply and one add per accumulation.
std::int64_t conv_flops(int cin, int cout, int kernel, int oh, int ow);

/// Multiply-accumulate totals per component for one image. Convolutions
/// count k*k*cin*cout per output; BN one per element; pooling the window
/// size per output; bilinear resize four per output; the gate multiply one
/// per element. Additions and activations are free.
struct FlopCount {
  std::int64_t backbone = 0;
  std::int64_t projections = 0;
  std::int64_t body = 0;
  std::int64_t decoder = 0;
  std::int64_t head = 0;

  std::int64_t macs() const { return backbone + projections + body + decoder + head; }
  std::int64_t flops() const { return 2 * macs(); }
};

FlopCount estimate_flops(const ModelConfig& cfg, int height, int width);

std::string format_params(const ParamCount& p);
std::string format_flops(const FlopCount& f);

}  // namespace ciisod
