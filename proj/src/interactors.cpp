#include "ciisod/interactors.hpp"

#include <algorithm>

#include "ciisod/image.hpp"
#include "ciisod/ops.hpp"

namespace ciisod {

std::string to_string(InteractorKind kind) {
  switch (kind) {
    case InteractorKind::PlainConv: return "PlainConv";
    case InteractorKind::RGC: return "RGC";
    case InteractorKind::RGCDagger: return "RGCDagger";
    case InteractorKind::PPM: return "PPM";
    case InteractorKind::PPMDagger: return "PPMDagger";
  }
  return "?";
}

InteractorKind interactor_kind_from_string(const std::string& name) {
  for (auto kind : {InteractorKind::PlainConv, InteractorKind::RGC, InteractorKind::RGCDagger,
                    InteractorKind::PPM, InteractorKind::PPMDagger}) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError("unknown interactor kind '" + name + "'");
}

void InteractorConfig::validate() const {
  if (channels < 4) throw ConfigError("interactor channels must be >= 4");
  if (kind == InteractorKind::PlainConv) {
    if (kernel != 1 && kernel != 3) throw ConfigError("PlainConv kernel must be 1 or 3");
    if (depth < 1) throw ConfigError("PlainConv depth must be >= 1");
  }
  if ((kind == InteractorKind::PPM || kind == InteractorKind::PPMDagger) && channels % 4 != 0) {
    throw ConfigError("PPM needs channels divisible by 4");
  }
}

template <class T>
RGCParams<T>::RGCParams(Initializer& init, int channels, bool fuse_final_activation)
    : left(init, channels, 3, 2), right(init, channels, 3, 2), fuse(init, channels, 3, 2) {
  fuse.layers.back().relu = fuse_final_activation;
}

template <class T>
void RGCParams<T>::collect(StateList<T>& out, const std::string& prefix) {
  left.collect(out, prefix + ".left");
  right.collect(out, prefix + ".right");
  fuse.collect(out, prefix + ".fuse");
}

template <class T>
PPMParams<T>::PPMParams(Initializer& init, int channels)
    : fuse(init, 2 * channels, channels, 3) {
  for (std::size_t i = 0; i < kPpmBins.size(); ++i) {
    branches.emplace_back(init, channels, channels / 4, 1);
  }
}

template <class T>
void PPMParams<T>::collect(StateList<T>& out, const std::string& prefix) {
  for (std::size_t i = 0; i < branches.size(); ++i) {
    branches[i].collect(out, prefix + ".branch" + std::to_string(kPpmBins[i]));
  }
  fuse.collect(out, prefix + ".fuse");
}

template <class T>
Tensor<T> rgc_gate(const Tensor<T>& right_input, RGCParams<T>& params, Mode mode) {
  Tensor<T> r = add(right_input, params.right.forward(right_input, mode));
  Tensor<T> pooled = global_max_pool(r);
  if (params.gate_bias != T(0)) {
    pooled = add(pooled, Tensor<T>(pooled.shape(), params.gate_bias));
  }
  return sigmoid(pooled);
}

template <class T>
Tensor<T> rgc_forward(const Tensor<T>& stage, const Tensor<T>& right_input,
                      RGCParams<T>& params, Mode mode) {
  const Shape& s = stage.shape();
  const Shape& r = right_input.shape();
  if (r.c != s.c || r.n != s.n) {
    throw DimensionError("rgc: stage " + s.str() + " vs right input " + r.str());
  }
  Tensor<T> gate = rgc_gate(right_input, params, mode);
  Tensor<T> local = add(stage, params.left.forward(stage, mode));
  Tensor<T> calibrated = mul(local, gate);
  return add(calibrated, params.fuse.forward(calibrated, mode));
}

template <class T>
Tensor<T> ppm_forward(const Tensor<T>& x, const Tensor<T>& source,
                      PPMParams<T>& params, Mode mode) {
  const Shape& s = x.shape();
  if (source.shape().c != s.c || source.shape().n != s.n) {
    throw DimensionError("ppm: input " + s.str() + " vs branch source " + source.shape().str());
  }
  std::vector<Tensor<T>> parts{x};
  for (std::size_t i = 0; i < params.branches.size(); ++i) {
    Tensor<T> pooled = adaptive_avg_pool(source, kPpmBins[i]);
    Tensor<T> reduced = params.branches[i].forward(pooled, mode);
    parts.push_back(bilinear_resize(reduced, s.h, s.w));
  }
  return params.fuse.forward(concat_channels(parts), mode);
}

template <class T>
Tensor<T> plain_conv_forward(const Tensor<T>& x, ConvStack<T>& params, Mode mode) {
  return params.forward(x, mode);
}

template <class T>
InteractorBody<T>::InteractorBody(Initializer& init, const InteractorConfig& cfg) : kind(cfg.kind) {
  switch (cfg.kind) {
    case InteractorKind::PlainConv:
      plain = ConvStack<T>(init, cfg.channels, cfg.kernel, cfg.depth);
      break;
    case InteractorKind::RGC:
    case InteractorKind::RGCDagger:
      rgc = RGCParams<T>(init, cfg.channels, cfg.fuse_final_activation);
      break;
    case InteractorKind::PPM:
    case InteractorKind::PPMDagger:
      ppm = PPMParams<T>(init, cfg.channels);
      break;
  }
}

template <class T>
Tensor<T> InteractorBody<T>::forward(const Tensor<T>& x, const Tensor<T>& successor, Mode mode) {
  switch (kind) {
    case InteractorKind::PlainConv: return plain_conv_forward(x, plain, mode);
    case InteractorKind::RGC: return rgc_forward(x, x, rgc, mode);
    case InteractorKind::RGCDagger: return rgc_forward(x, successor, rgc, mode);
    case InteractorKind::PPM: return ppm_forward(x, x, ppm, mode);
    case InteractorKind::PPMDagger: return ppm_forward(x, successor, ppm, mode);
  }
  return x;
}

template <class T>
void InteractorBody<T>::collect(StateList<T>& out, const std::string& prefix) {
  switch (kind) {
    case InteractorKind::PlainConv: plain.collect(out, prefix + ".plain"); break;
    case InteractorKind::RGC:
    case InteractorKind::RGCDagger: rgc.collect(out, prefix + ".rgc"); break;
    case InteractorKind::PPM:
    case InteractorKind::PPMDagger: ppm.collect(out, prefix + ".ppm"); break;
  }
}

template <class T>
CentralizedInteraction<T>::CentralizedInteraction(const InteractorConfig& cfg,
                                                  const std::vector<int>& stage_channels,
                                                  std::uint64_t seed)
    : cfg_(cfg), stage_channels_(stage_channels) {
  cfg_.validate();
  if (stage_channels.empty()) throw ConfigError("CII needs at least one stage");
  Initializer init(derive_seed(seed, "cii"));
  for (int cin : stage_channels) projections_.emplace_back(init, cin, cfg_.channels, 1);
  const std::size_t copies = cfg_.shared ? 1 : stage_channels.size();
  for (std::size_t i = 0; i < copies; ++i) bodies_.emplace_back(init, cfg_);
}

template <class T>
std::vector<Tensor<T>> CentralizedInteraction<T>::project_stages(const FeaturePyramid<T>& pyramid,
                                                                 Mode mode) {
  if (pyramid.stages.size() != projections_.size()) {
    throw DimensionError("CII configured for " + std::to_string(projections_.size()) +
                         " stages, got " + std::to_string(pyramid.stages.size()));
  }
  std::vector<Tensor<T>> out;
  for (std::size_t i = 0; i < projections_.size(); ++i) {
    const Shape& s = pyramid.stages[i].shape();
    if (s.c != stage_channels_[i]) {
      throw DimensionError("CII stage " + std::to_string(i + 1) + " expects " +
                           std::to_string(stage_channels_[i]) + " channels, got " + s.str());
    }
    out.push_back(projections_[i].forward(pyramid.stages[i], mode));
  }
  return out;
}

template <class T>
std::vector<Tensor<T>> CentralizedInteraction<T>::apply_projected(
    const std::vector<Tensor<T>>& projected, Mode mode) {
  std::vector<Tensor<T>> out;
  const std::size_t m = projected.size();
  for (std::size_t i = 0; i < m; ++i) {
    // The coarsest stage has no successor and feeds itself.
    const Tensor<T>& successor = i + 1 < m ? projected[i + 1] : projected[i];
    out.push_back(body(i).forward(projected[i], successor, mode));
  }
  return out;
}

template <class T>
void CentralizedInteraction<T>::collect_projections(StateList<T>& out) {
  for (std::size_t i = 0; i < projections_.size(); ++i) {
    const std::size_t first = out.size();
    projections_[i].collect(out, "cii.proj" + std::to_string(i + 1));
    for (std::size_t k = first; k < out.size(); ++k) out[k].component = "projections";
  }
}

template <class T>
void CentralizedInteraction<T>::collect_body(StateList<T>& out) {
  for (std::size_t i = 0; i < bodies_.size(); ++i) {
    const std::size_t first = out.size();
    const std::string prefix = cfg_.shared ? "cii.shared" : "cii.stage" + std::to_string(i + 1);
    bodies_[i].collect(out, prefix);
    for (std::size_t k = first; k < out.size(); ++k) {
      out[k].component = "body";
      if (cfg_.shared) out[k].shared_group = "cii.shared";
    }
  }
}

template <class T>
std::vector<std::filesystem::path> dump_features(const std::vector<Tensor<T>>& stages,
                                                 const std::filesystem::path& dir,
                                                 const std::string& tag) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const Shape& s = stages[i].shape();
    GrayMap map(s.h, s.w);
    for (int y = 0; y < s.h; ++y) {
      for (int x = 0; x < s.w; ++x) {
        double acc = 0;
        for (int c = 0; c < s.c; ++c) acc += stages[i].at(0, c, y, x);
        map.at(y, x) = static_cast<float>(acc / s.c);
      }
    }
    const auto [lo, hi] = std::minmax_element(map.values.begin(), map.values.end());
    const float min = *lo, max = *hi;
    for (float& v : map.values) v = max > min ? (v - min) / (max - min) : 128.0f / 255.0f;
    auto path = dir / ("stage" + std::to_string(i + 1) + "_" + tag + ".pgm");
    write_pgm(map, path);
    written.push_back(std::move(path));
  }
  return written;
}

#define CIISOD_INSTANTIATE(T)                                                                   \
  template struct RGCParams<T>;                                                                 \
  template struct PPMParams<T>;                                                                 \
  template struct InteractorBody<T>;                                                            \
  template class CentralizedInteraction<T>;                                                     \
  template Tensor<T> rgc_gate(const Tensor<T>&, RGCParams<T>&, Mode);                           \
  template Tensor<T> rgc_forward(const Tensor<T>&, const Tensor<T>&, RGCParams<T>&, Mode);      \
  template Tensor<T> ppm_forward(const Tensor<T>&, const Tensor<T>&, PPMParams<T>&, Mode);      \
  template Tensor<T> plain_conv_forward(const Tensor<T>&, ConvStack<T>&, Mode);                 \
  template std::vector<std::filesystem::path> dump_features(const std::vector<Tensor<T>>&,      \
                                                            const std::filesystem::path&,       \
                                                            const std::string&);

CIISOD_INSTANTIATE(float)
CIISOD_INSTANTIATE(double)
#undef CIISOD_INSTANTIATE

}  // namespace ciisod
