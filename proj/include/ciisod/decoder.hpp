#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ciisod/layers.hpp"

namespace ciisod {

enum class MergeMode { Add, Concat };

std::string to_string(MergeMode mode);
MergeMode merge_mode_from_string(const std::string& name);

struct DecoderConfig {
  MergeMode merge = MergeMode::Add;
};

/// Top-down pathway: D_M = C_M, D_i = smooth_i(merge(C_i, up(D_{i+1}))),
/// then a 1x1 head, resize to the input size and a sigmoid.
template <class T>
class Decoder {
 public:
  Decoder(int channels, int levels, const DecoderConfig& cfg, std::uint64_t seed);

  Tensor<T> forward(const std::vector<Tensor<T>>& lateral, int out_h, int out_w, Mode mode);

  void collect(StateList<T>& out);
  /// The head alone (for zero-init checks and accounting).
  Conv<T>& head() { return head_; }

 private:
  DecoderConfig cfg_;
  int channels_;
  std::vector<ConvBnRelu<T>> smooth_;  // smooth_[i] produces D_{i+1}
  Conv<T> head_;
};

extern template class Decoder<float>;
extern template class Decoder<double>;

}  // namespace ciisod
