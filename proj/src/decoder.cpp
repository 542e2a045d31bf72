#include "ciisod/decoder.hpp"

#include "ciisod/ops.hpp"

namespace ciisod {

std::string to_string(MergeMode mode) { return mode == MergeMode::Add ? "add" : "concat"; }

MergeMode merge_mode_from_string(const std::string& name) {
  if (name == "add") return MergeMode::Add;
  if (name == "concat") return MergeMode::Concat;
  throw ConfigError("unknown decoder merge '" + name + "'");
}

template <class T>
Decoder<T>::Decoder(int channels, int levels, const DecoderConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), channels_(channels) {
  if (levels < 1) throw ConfigError("decoder needs at least one level");
  Initializer init(derive_seed(seed, "decoder"));
  const int cin = cfg_.merge == MergeMode::Add ? channels : 2 * channels;
  for (int i = 0; i + 1 < levels; ++i) smooth_.emplace_back(init, cin, channels, 3);
  head_ = Conv<T>(init, channels, 1, 1, 1, true, 1.0);
}

template <class T>
Tensor<T> Decoder<T>::forward(const std::vector<Tensor<T>>& lateral, int out_h, int out_w,
                              Mode mode) {
  if (lateral.size() != smooth_.size() + 1) {
    throw DimensionError("decoder expects " + std::to_string(smooth_.size() + 1) +
                         " lateral maps, got " + std::to_string(lateral.size()));
  }
  for (std::size_t i = 0; i < lateral.size(); ++i) {
    const Shape& s = lateral[i].shape();
    if (s.c != channels_) {
      throw DimensionError("decoder level " + std::to_string(i + 1) + " has shape " + s.str() +
                           ", expected " + std::to_string(channels_) + " channels");
    }
    if (i + 1 < lateral.size()) {
      const Shape& next = lateral[i + 1].shape();
      if (s.h != 2 * next.h || s.w != 2 * next.w) {
        throw DimensionError("decoder stride chain broken between levels " +
                             std::to_string(i + 1) + " " + s.str() + " and " +
                             std::to_string(i + 2) + " " + next.str());
      }
    }
  }
  Tensor<T> d = lateral.back();
  for (std::size_t k = lateral.size() - 1; k-- > 0;) {
    const Shape& target = lateral[k].shape();
    Tensor<T> up = bilinear_resize(d, target.h, target.w);
    Tensor<T> merged = cfg_.merge == MergeMode::Add
                           ? add(lateral[k], up)
                           : concat_channels(std::vector<Tensor<T>>{lateral[k], up});
    d = smooth_[k].forward(merged, mode);
  }
  Tensor<T> logits = head_.forward(d);
  return sigmoid(bilinear_resize(logits, out_h, out_w));
}

template <class T>
void Decoder<T>::collect(StateList<T>& out) {
  std::size_t first = out.size();
  for (std::size_t i = 0; i < smooth_.size(); ++i) {
    smooth_[i].collect(out, "decoder.smooth" + std::to_string(i + 1));
  }
  for (std::size_t k = first; k < out.size(); ++k) out[k].component = "decoder";
  first = out.size();
  head_.collect(out, "decoder.head");
  for (std::size_t k = first; k < out.size(); ++k) out[k].component = "head";
}

template class Decoder<float>;
template class Decoder<double>;

}  // namespace ciisod
