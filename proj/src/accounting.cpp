#include "ciisod/accounting.hpp"

#include <iomanip>
#include <sstream>

#include "ciisod/error.hpp"

namespace ciisod {

namespace {

using i64 = std::int64_t;

i64 conv_params(i64 cin, i64 cout, i64 k) { return k * k * cin * cout; }
i64 bn_params(i64 c) { return 2 * c; }
i64 cbr_params(i64 cin, i64 cout, i64 k) { return conv_params(cin, cout, k) + bn_params(cout); }

i64 backbone_params(const BackboneConfig& cfg) {
  i64 total = cbr_params(3, cfg.stem_channels, 7);
  i64 cin = cfg.stem_channels;
  for (int s = 0; s < 4; ++s) {
    const i64 width = cfg.stage_channels[s];
    for (int b = 0; b < cfg.blocks_per_stage[s]; ++b) {
      const int stride = (s > 0 && b == 0) ? 2 : 1;
      if (cfg.block == BlockKind::Basic) {
        total += cbr_params(cin, width, 3) + cbr_params(width, width, 3);
        if (stride != 1 || cin != width) total += cbr_params(cin, width, 1);
        cin = width;
      } else {
        const i64 out = 4 * width;
        total += cbr_params(cin, width, 1) + cbr_params(width, width, 3) +
                 cbr_params(width, out, 1);
        if (stride != 1 || cin != out) total += cbr_params(cin, out, 1);
        cin = out;
      }
    }
  }
  return total;
}

int out_size(int in, int kernel, int stride) {
  return (in + 2 * (kernel / 2) - kernel) / stride + 1;
}

// conv + BN over an oh x ow output.
i64 cbr_macs(int cin, int cout, int k, int oh, int ow) {
  return conv_macs(cin, cout, k, oh, ow) + static_cast<i64>(cout) * oh * ow;
}

i64 resize_macs(int c, int oh, int ow) { return 4LL * c * oh * ow; }

struct Extent {
  int h, w;
};

i64 backbone_macs(const BackboneConfig& cfg, int height, int width, std::vector<Extent>& sizes) {
  int h = out_size(height, 7, 2), w = out_size(width, 7, 2);
  i64 total = cbr_macs(3, cfg.stem_channels, 7, h, w);
  sizes.push_back({h, w});
  const int ph = out_size(h, 3, 2), pw = out_size(w, 3, 2);
  total += 9LL * cfg.stem_channels * ph * pw;
  h = ph;
  w = pw;
  int cin = cfg.stem_channels;
  for (int s = 0; s < 4; ++s) {
    const int width_s = cfg.stage_channels[s];
    for (int b = 0; b < cfg.blocks_per_stage[s]; ++b) {
      const int stride = (s > 0 && b == 0) ? 2 : 1;
      const int oh = out_size(h, 3, stride), ow = out_size(w, 3, stride);
      if (cfg.block == BlockKind::Basic) {
        total += cbr_macs(cin, width_s, 3, oh, ow) + cbr_macs(width_s, width_s, 3, oh, ow);
        if (stride != 1 || cin != width_s) total += cbr_macs(cin, width_s, 1, oh, ow);
        cin = width_s;
      } else {
        const int out = 4 * width_s;
        total += cbr_macs(cin, width_s, 1, h, w) + cbr_macs(width_s, width_s, 3, oh, ow) +
                 cbr_macs(width_s, out, 1, oh, ow);
        if (stride != 1 || cin != out) total += cbr_macs(cin, out, 1, oh, ow);
        cin = out;
      }
      h = oh;
      w = ow;
    }
    sizes.push_back({h, w});
  }
  return total;
}

i64 body_macs(const InteractorConfig& cfg, Extent x, Extent successor) {
  const int c = cfg.channels;
  const i64 hw = static_cast<i64>(x.h) * x.w;
  switch (cfg.kind) {
    case InteractorKind::PlainConv:
      return cfg.depth * cbr_macs(c, c, cfg.kernel, x.h, x.w);
    case InteractorKind::RGC:
    case InteractorKind::RGCDagger: {
      const Extent r = cfg.kind == InteractorKind::RGC ? x : successor;
      const i64 rhw = static_cast<i64>(r.h) * r.w;
      return 2 * cbr_macs(c, c, 3, r.h, r.w) + c * rhw  // right branch and GMP
             + 2 * cbr_macs(c, c, 3, x.h, x.w)           // left branch
             + c * hw                                    // gate multiply
             + 2 * cbr_macs(c, c, 3, x.h, x.w);          // fusion
    }
    case InteractorKind::PPM:
    case InteractorKind::PPMDagger: {
      const Extent src = cfg.kind == InteractorKind::PPM ? x : successor;
      i64 total = 0;
      for (int bins : kPpmBins) {
        total += static_cast<i64>(c) * src.h * src.w;  // each input read once per branch
        total += cbr_macs(c, c / 4, 1, bins, bins);
        total += resize_macs(c / 4, x.h, x.w);
      }
      return total + cbr_macs(2 * c, c, 3, x.h, x.w);
    }
  }
  return 0;
}

}  // namespace

std::int64_t conv_macs(int cin, int cout, int kernel, int oh, int ow) {
  return static_cast<i64>(kernel) * kernel * cin * cout * oh * ow;
}

std::int64_t conv_flops(int cin, int cout, int kernel, int oh, int ow) {
  return 2 * conv_macs(cin, cout, kernel, oh, ow);
}

std::int64_t interactor_body_params(const InteractorConfig& cfg) {
  const i64 c = cfg.channels;
  switch (cfg.kind) {
    case InteractorKind::PlainConv: return cfg.depth * cbr_params(c, c, cfg.kernel);
    case InteractorKind::RGC:
    case InteractorKind::RGCDagger: return 6 * cbr_params(c, c, 3);
    case InteractorKind::PPM:
    case InteractorKind::PPMDagger:
      return static_cast<i64>(kPpmBins.size()) * cbr_params(c, c / 4, 1) + cbr_params(2 * c, c, 3);
  }
  return 0;
}

ParamCount count_params(const ModelConfig& cfg) {
  ParamCount p;
  p.backbone = backbone_params(cfg.backbone);
  const i64 c = cfg.interactor.channels;
  const auto stages = cfg.backbone.pyramid_channels();
  for (int cin : stages) p.projections += cbr_params(cin, c, 1);
  const i64 copies = cfg.interactor.shared ? 1 : static_cast<i64>(stages.size());
  p.body = copies * interactor_body_params(cfg.interactor);
  const i64 smooth_in = cfg.decoder.merge == MergeMode::Add ? c : 2 * c;
  p.decoder = static_cast<i64>(stages.size() - 1) * cbr_params(smooth_in, c, 3);
  p.head = c + 1;
  return p;
}

template <class T>
ParamCount count_params(SaliencyModel<T>& model) {
  ParamCount p;
  for (const auto& e : model.parameters()) {
    const i64 n = static_cast<i64>(e.count());
    if (e.component == "backbone") p.backbone += n;
    else if (e.component == "projections") p.projections += n;
    else if (e.component == "body") p.body += n;
    else if (e.component == "decoder") p.decoder += n;
    else if (e.component == "head") p.head += n;
    else throw ContractError("parameter " + e.name + " has no component");
  }
  return p;
}

FlopCount estimate_flops(const ModelConfig& cfg, int height, int width) {
  FlopCount f;
  std::vector<Extent> sizes;
  f.backbone = backbone_macs(cfg.backbone, height, width, sizes);
  const int c = cfg.interactor.channels;
  const auto stages = cfg.backbone.pyramid_channels();
  const std::size_t m = sizes.size();
  for (std::size_t i = 0; i < m; ++i) {
    f.projections += cbr_macs(stages[i], c, 1, sizes[i].h, sizes[i].w);
    const Extent succ = i + 1 < m ? sizes[i + 1] : sizes[i];
    f.body += body_macs(cfg.interactor, sizes[i], succ);
  }
  const int smooth_in = cfg.decoder.merge == MergeMode::Add ? c : 2 * c;
  for (std::size_t i = 0; i + 1 < m; ++i) {
    f.decoder += resize_macs(c, sizes[i].h, sizes[i].w);
    f.decoder += cbr_macs(smooth_in, c, 3, sizes[i].h, sizes[i].w);
  }
  f.head = conv_macs(c, 1, 1, sizes[0].h, sizes[0].w) + resize_macs(1, height, width);
  return f;
}

namespace {
std::string millions(i64 v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << v / 1e6 << "M";
  return os.str();
}
std::string billions(i64 v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << v / 1e9 << "G";
  return os.str();
}
}  // namespace

std::string format_params(const ParamCount& p) {
  std::ostringstream os;
  os << "backbone     " << p.backbone << " (" << millions(p.backbone) << ")\n"
     << "projections  " << p.projections << "\n"
     << "interactor   " << p.body << "\n"
     << "decoder      " << p.decoder << "\n"
     << "head         " << p.head << "\n"
     << "extras       " << p.extras() << " (" << millions(p.extras()) << ")\n"
     << "total        " << p.total() << " (" << millions(p.total()) << ")\n";
  return os.str();
}

std::string format_flops(const FlopCount& f) {
  std::ostringstream os;
  auto row = [&](const char* name, i64 v) {
    os << std::left << std::setw(13) << name << billions(v) << " MAC  " << billions(2 * v)
       << " FLOP\n";
  };
  row("backbone", f.backbone);
  row("projections", f.projections);
  row("interactor", f.body);
  row("decoder", f.decoder);
  row("head", f.head);
  row("total", f.macs());
  return os.str();
}

template ParamCount count_params(SaliencyModel<float>&);
template ParamCount count_params(SaliencyModel<double>&);

}  // namespace ciisod
