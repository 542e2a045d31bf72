#include "ciisod/nn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

namespace ciisod {

int window_output_size(int in, int kernel, int stride, int padding) {
  if (stride < 1) throw DimensionError("stride must be >= 1");
  const int span = in + 2 * padding - kernel;
  if (span < 0) {
    throw DimensionError("window of " + std::to_string(kernel) +
                         " does not fit input extent " + std::to_string(in) +
                         " with padding " + std::to_string(padding));
  }
  return span / stride + 1;
}

namespace {

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

struct ConvGeometry {
  int cin, h, w, kh, kw, stride, pad, oh, ow;
  bool direct() const {  // 1x1, stride 1, no padding: input plane is the column matrix
    return kh == 1 && kw == 1 && stride == 1 && pad == 0;
  }
};

template <class T>
void im2col(const T* img, const ConvGeometry& g, T* col) {
  const int plane = g.oh * g.ow;
  for (int ci = 0; ci < g.cin; ++ci) {
    for (int ky = 0; ky < g.kh; ++ky) {
      for (int kx = 0; kx < g.kw; ++kx) {
        T* row = col + static_cast<std::size_t>((ci * g.kh + ky) * g.kw + kx) * plane;
        const T* src = img + static_cast<std::size_t>(ci) * g.h * g.w;
        for (int oy = 0; oy < g.oh; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          T* dst = row + oy * g.ow;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.ow, T(0));
            continue;
          }
          const T* line = src + static_cast<std::size_t>(iy) * g.w;
          for (int ox = 0; ox < g.ow; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            dst[ox] = (ix >= 0 && ix < g.w) ? line[ix] : T(0);
          }
        }
      }
    }
  }
}

template <class T>
void col2im_add(const T* col, const ConvGeometry& g, T* img) {
  const int plane = g.oh * g.ow;
  for (int ci = 0; ci < g.cin; ++ci) {
    for (int ky = 0; ky < g.kh; ++ky) {
      for (int kx = 0; kx < g.kw; ++kx) {
        const T* row = col + static_cast<std::size_t>((ci * g.kh + ky) * g.kw + kx) * plane;
        T* dst = img + static_cast<std::size_t>(ci) * g.h * g.w;
        for (int oy = 0; oy < g.oh; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          T* line = dst + static_cast<std::size_t>(iy) * g.w;
          const T* src = row + oy * g.ow;
          for (int ox = 0; ox < g.ow; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) line[ix] += src[ox];
          }
        }
      }
    }
  }
}

bool valid_kernel(int k) { return k == 1 || k == 3 || k == 7; }

}  // namespace

template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight,
                 const Tensor<T>& bias, int stride, int padding) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (ws.c != xs.c) {
    throw DimensionError("conv2d: input " + xs.str() + " vs weight " + ws.str());
  }
  if (!valid_kernel(ws.h) || !valid_kernel(ws.w)) {
    throw DimensionError("conv2d: unsupported kernel " + ws.str());
  }
  if (stride != 1 && stride != 2) {
    throw DimensionError("conv2d: stride must be 1 or 2");
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.shape() != Shape{1, ws.n, 1, 1}) {
    throw DimensionError("conv2d: bias " + bias.shape().str() +
                         " for weight " + ws.str());
  }
  ConvGeometry g{xs.c,   xs.h,    xs.w, ws.h, ws.w, stride, padding,
                 window_output_size(xs.h, ws.h, stride, padding),
                 window_output_size(xs.w, ws.w, stride, padding)};
  const int cout = ws.n;
  const int k = g.cin * g.kh * g.kw;
  const int plane = g.oh * g.ow;
  const Shape os{xs.n, cout, g.oh, g.ow};

  std::vector<T> out(os.numel());
  std::vector<T> col(g.direct() ? 0 : static_cast<std::size_t>(k) * plane);
  ConstMatMap<T> wmat(weight.raw(), cout, k);
  for (int n = 0; n < xs.n; ++n) {
    const T* img = x.raw() + static_cast<std::size_t>(n) * xs.c * xs.h * xs.w;
    const T* colp = img;
    if (!g.direct()) {
      im2col(img, g, col.data());
      colp = col.data();
    }
    MatMap<T> omat(out.data() + static_cast<std::size_t>(n) * cout * plane, cout, plane);
    omat.noalias() = wmat * ConstMatMap<T>(colp, k, plane);
    if (has_bias) {
      for (int co = 0; co < cout; ++co) omat.row(co).array() += bias.raw()[co];
    }
  }

  return Tensor<T>::make_result(
      os, std::move(out), {&x, &weight, &bias}, [g, cout, k, plane, has_bias](detail::TensorImpl<T>& node) {
        auto& in = *node.inputs[0];
        auto& wt = *node.inputs[1];
        const int batch = in.shape.n;
        const std::size_t in_stride = static_cast<std::size_t>(g.cin) * g.h * g.w;
        std::vector<T> col(g.direct() ? 0 : static_cast<std::size_t>(k) * plane);
        std::vector<T> dcol(static_cast<std::size_t>(k) * plane);
        ConstMatMap<T> wmat(wt.data.data(), cout, k);
        if (wt.requires_grad) wt.ensure_grad();
        if (in.requires_grad) in.ensure_grad();
        for (int n = 0; n < batch; ++n) {
          ConstMatMap<T> gmat(node.grad.data() + static_cast<std::size_t>(n) * cout * plane, cout, plane);
          if (wt.requires_grad) {
            const T* colp = in.data.data() + n * in_stride;
            if (!g.direct()) {
              im2col(colp, g, col.data());
              colp = col.data();
            }
            MatMap<T> dw(wt.grad.data(), cout, k);
            dw.noalias() += gmat * ConstMatMap<T>(colp, k, plane).transpose();
          }
          if (in.requires_grad) {
            T* dimg = in.grad.data() + n * in_stride;
            if (g.direct()) {
              MatMap<T>(dimg, k, plane).noalias() += wmat.transpose() * gmat;
            } else {
              MatMap<T>(dcol.data(), k, plane).noalias() = wmat.transpose() * gmat;
              col2im_add(dcol.data(), g, dimg);
            }
          }
        }
        if (has_bias) {
          auto& bs = *node.inputs[2];
          if (bs.requires_grad) {
            bs.ensure_grad();
            for (int n = 0; n < batch; ++n) {
              for (int co = 0; co < cout; ++co) {
                const T* gp = node.grad.data() + (static_cast<std::size_t>(n) * cout + co) * plane;
                T acc = 0;
                for (int i = 0; i < plane; ++i) acc += gp[i];
                bs.grad[co] += acc;
              }
            }
          }
        }
      });
}

template <class T>
Tensor<T> batchnorm2d(const Tensor<T>& x, const Tensor<T>& gamma,
                      const Tensor<T>& beta, BatchNormState<T>& state,
                      Mode mode, const BatchNormOptions& options) {
  const Shape& s = x.shape();
  const Shape param_shape{1, s.c, 1, 1};
  if (gamma.shape() != param_shape || beta.shape() != param_shape ||
      state.running_mean.size() != static_cast<std::size_t>(s.c)) {
    throw DimensionError("batchnorm2d: input " + s.str() + " with gamma " +
                         gamma.shape().str());
  }
  const std::size_t plane = s.plane();
  const std::size_t count = static_cast<std::size_t>(s.n) * plane;
  std::vector<T> mean(s.c), invstd(s.c);
  const T* px = x.raw();

  if (mode == Mode::Train) {
    if (count < 2) {
      throw DimensionError("batchnorm2d: training needs n*h*w >= 2, got " + s.str());
    }
    for (int c = 0; c < s.c; ++c) {
      double acc = 0;
      for (int n = 0; n < s.n; ++n) {
        const T* p = px + (static_cast<std::size_t>(n) * s.c + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      }
      const double m = acc / count;
      double sq = 0;
      for (int n = 0; n < s.n; ++n) {
        const T* p = px + (static_cast<std::size_t>(n) * s.c + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) sq += (p[i] - m) * (p[i] - m);
      }
      const double var = sq / count;
      mean[c] = static_cast<T>(m);
      invstd[c] = static_cast<T>(1.0 / std::sqrt(var + options.eps));
      const double unbiased = sq / (count - 1);
      state.running_mean[c] = static_cast<T>((1 - options.momentum) * state.running_mean[c] + options.momentum * m);
      state.running_var[c] = static_cast<T>((1 - options.momentum) * state.running_var[c] + options.momentum * unbiased);
    }
    ++state.batches_tracked;
  } else {
    if (state.batches_tracked == 0 && !state.eval_without_stats) {
      state.eval_without_stats = true;
      std::cerr << "warning: batchnorm2d evaluated before any running statistics were collected\n";
    }
    for (int c = 0; c < s.c; ++c) {
      mean[c] = state.running_mean[c];
      invstd[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(state.running_var[c]) + options.eps));
    }
  }

  std::vector<T> xhat(s.numel());
  std::vector<T> out(s.numel());
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * plane;
      const T g = gamma.raw()[c];
      const T b = beta.raw()[c];
      for (std::size_t i = 0; i < plane; ++i) {
        const T v = (px[base + i] - mean[c]) * invstd[c];
        xhat[base + i] = v;
        out[base + i] = g * v + b;
      }
    }
  }

  return Tensor<T>::make_result(
      s, std::move(out), {&x, &gamma, &beta},
      [xhat = std::move(xhat), invstd = std::move(invstd), mode, plane, count](detail::TensorImpl<T>& node) {
        auto& in = *node.inputs[0];
        auto& ga = *node.inputs[1];
        auto& be = *node.inputs[2];
        const Shape& s = in.shape;
        const std::vector<T>& g = node.grad;
        std::vector<T> sum_g(s.c, T(0)), sum_gx(s.c, T(0));
        for (int n = 0; n < s.n; ++n) {
          for (int c = 0; c < s.c; ++c) {
            const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * plane;
            T a = 0, b = 0;
            for (std::size_t i = 0; i < plane; ++i) {
              a += g[base + i];
              b += g[base + i] * xhat[base + i];
            }
            sum_g[c] += a;
            sum_gx[c] += b;
          }
        }
        if (ga.requires_grad) {
          ga.ensure_grad();
          for (int c = 0; c < s.c; ++c) ga.grad[c] += sum_gx[c];
        }
        if (be.requires_grad) {
          be.ensure_grad();
          for (int c = 0; c < s.c; ++c) be.grad[c] += sum_g[c];
        }
        if (!in.requires_grad) return;
        in.ensure_grad();
        const T inv_count = T(1) / static_cast<T>(count);
        for (int n = 0; n < s.n; ++n) {
          for (int c = 0; c < s.c; ++c) {
            const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * plane;
            const T scale = ga.data[c] * invstd[c];
            if (mode == Mode::Train) {
              const T mg = sum_g[c] * inv_count;
              const T mgx = sum_gx[c] * inv_count;
              for (std::size_t i = 0; i < plane; ++i) {
                in.grad[base + i] += scale * (g[base + i] - mg - xhat[base + i] * mgx);
              }
            } else {
              for (std::size_t i = 0; i < plane; ++i) in.grad[base + i] += scale * g[base + i];
            }
          }
        }
      });
}

template <class T>
Tensor<T> maxpool2d(const Tensor<T>& x, int kernel, int stride) {
  if (kernel != 2 && kernel != 3) {
    throw DimensionError("maxpool2d: kernel must be 2 or 3");
  }
  const int pad = kernel == 3 ? 1 : 0;
  const Shape& s = x.shape();
  const int oh = window_output_size(s.h, kernel, stride, pad);
  const int ow = window_output_size(s.w, kernel, stride, pad);
  const Shape os{s.n, s.c, oh, ow};
  std::vector<T> out(os.numel());
  std::vector<std::size_t> argmax(os.numel());
  std::size_t o = 0;
  for (int nc = 0; nc < s.n * s.c; ++nc) {
    const std::size_t base = static_cast<std::size_t>(nc) * s.plane();
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox, ++o) {
        T best = -std::numeric_limits<T>::infinity();
        std::size_t where = base;
        bool found = false;
        for (int ky = 0; ky < kernel; ++ky) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= s.h) continue;
          for (int kx = 0; kx < kernel; ++kx) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= s.w) continue;
            const std::size_t idx = base + static_cast<std::size_t>(iy) * s.w + ix;
            if (!found || x.raw()[idx] > best) {
              best = x.raw()[idx];
              where = idx;
              found = true;
            }
          }
        }
        out[o] = best;
        argmax[o] = where;
      }
    }
  }
  return Tensor<T>::make_result(
      os, std::move(out), {&x}, [argmax = std::move(argmax)](detail::TensorImpl<T>& node) {
        auto& in = *node.inputs[0];
        if (!in.requires_grad) return;
        in.ensure_grad();
        for (std::size_t i = 0; i < argmax.size(); ++i) in.grad[argmax[i]] += node.grad[i];
      });
}

template <class T>
Tensor<T> global_max_pool(const Tensor<T>& x) {
  const Shape& s = x.shape();
  if (s.h < 1 || s.w < 1) throw DimensionError("global_max_pool: empty map " + s.str());
  const Shape os{s.n, s.c, 1, 1};
  const std::size_t plane = s.plane();
  std::vector<T> out(os.numel());
  std::vector<std::size_t> argmax(os.numel());
  for (std::size_t nc = 0; nc < out.size(); ++nc) {
    const T* p = x.raw() + nc * plane;
    const std::size_t best = static_cast<std::size_t>(std::max_element(p, p + plane) - p);
    out[nc] = p[best];
    argmax[nc] = nc * plane + best;
  }
  return Tensor<T>::make_result(
      os, std::move(out), {&x}, [argmax = std::move(argmax)](detail::TensorImpl<T>& node) {
        auto& in = *node.inputs[0];
        if (!in.requires_grad) return;
        in.ensure_grad();
        for (std::size_t i = 0; i < argmax.size(); ++i) in.grad[argmax[i]] += node.grad[i];
      });
}

template <class T>
Tensor<T> adaptive_avg_pool(const Tensor<T>& x, int bins) {
  if (bins < 1) throw DimensionError("adaptive_avg_pool: bins must be >= 1");
  const Shape& s = x.shape();
  const Shape os{s.n, s.c, bins, bins};
  auto lo = [bins](int i, int extent) { return (i * extent) / bins; };
  auto hi = [bins](int i, int extent) { return ((i + 1) * extent + bins - 1) / bins; };
  std::vector<T> out(os.numel());
  for (int nc = 0; nc < s.n * s.c; ++nc) {
    const T* p = x.raw() + static_cast<std::size_t>(nc) * s.plane();
    for (int by = 0; by < bins; ++by) {
      for (int bx = 0; bx < bins; ++bx) {
        T acc = 0;
        const int y0 = lo(by, s.h), y1 = hi(by, s.h), x0 = lo(bx, s.w), x1 = hi(bx, s.w);
        for (int y = y0; y < y1; ++y) {
          for (int xx = x0; xx < x1; ++xx) acc += p[y * s.w + xx];
        }
        out[(static_cast<std::size_t>(nc) * bins + by) * bins + bx] =
            acc / static_cast<T>((y1 - y0) * (x1 - x0));
      }
    }
  }
  return Tensor<T>::make_result(
      os, std::move(out), {&x}, [bins, lo, hi](detail::TensorImpl<T>& node) {
        auto& in = *node.inputs[0];
        if (!in.requires_grad) return;
        in.ensure_grad();
        const Shape& s = in.shape;
        for (int nc = 0; nc < s.n * s.c; ++nc) {
          T* p = in.grad.data() + static_cast<std::size_t>(nc) * s.plane();
          for (int by = 0; by < bins; ++by) {
            for (int bx = 0; bx < bins; ++bx) {
              const int y0 = lo(by, s.h), y1 = hi(by, s.h), x0 = lo(bx, s.w), x1 = hi(bx, s.w);
              const T g = node.grad[(static_cast<std::size_t>(nc) * bins + by) * bins + bx] /
                          static_cast<T>((y1 - y0) * (x1 - x0));
              for (int y = y0; y < y1; ++y) {
                for (int xx = x0; xx < x1; ++xx) p[y * s.w + xx] += g;
              }
            }
          }
        }
      });
}

namespace {

template <class T>
struct AxisTaps {
  std::vector<int> lo, hi;
  std::vector<T> frac;  // weight of `hi`
};

template <class T>
AxisTaps<T> axis_taps(int in, int out) {
  AxisTaps<T> taps;
  taps.lo.resize(out);
  taps.hi.resize(out);
  taps.frac.resize(out);
  const double scale = static_cast<double>(in) / out;
  for (int d = 0; d < out; ++d) {
    double src = (d + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    int i0 = static_cast<int>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    taps.lo[d] = i0;
    taps.hi[d] = std::min(i0 + 1, in - 1);
    taps.frac[d] = static_cast<T>(src - i0);
  }
  return taps;
}

}  // namespace

template <class T>
Tensor<T> bilinear_resize(const Tensor<T>& x, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) {
    throw DimensionError("bilinear_resize: target must be at least 1x1");
  }
  const Shape& s = x.shape();
  if (s.h < 1 || s.w < 1) throw DimensionError("bilinear_resize: empty input " + s.str());
  const Shape os{s.n, s.c, out_h, out_w};
  auto ty = axis_taps<T>(s.h, out_h);
  auto tx = axis_taps<T>(s.w, out_w);
  std::vector<T> out(os.numel());
  for (int nc = 0; nc < s.n * s.c; ++nc) {
    const T* p = x.raw() + static_cast<std::size_t>(nc) * s.plane();
    T* o = out.data() + static_cast<std::size_t>(nc) * os.plane();
    for (int y = 0; y < out_h; ++y) {
      const T* r0 = p + static_cast<std::size_t>(ty.lo[y]) * s.w;
      const T* r1 = p + static_cast<std::size_t>(ty.hi[y]) * s.w;
      const T fy = ty.frac[y];
      for (int xx = 0; xx < out_w; ++xx) {
        const T fx = tx.frac[xx];
        const T top = r0[tx.lo[xx]] + fx * (r0[tx.hi[xx]] - r0[tx.lo[xx]]);
        const T bot = r1[tx.lo[xx]] + fx * (r1[tx.hi[xx]] - r1[tx.lo[xx]]);
        o[y * out_w + xx] = top + fy * (bot - top);
      }
    }
  }
  return Tensor<T>::make_result(
      os, std::move(out), {&x},
      [ty = std::move(ty), tx = std::move(tx)](detail::TensorImpl<T>& node) {
        auto& in = *node.inputs[0];
        if (!in.requires_grad) return;
        in.ensure_grad();
        const Shape& s = in.shape;
        const Shape& os = node.shape;
        for (int nc = 0; nc < s.n * s.c; ++nc) {
          T* p = in.grad.data() + static_cast<std::size_t>(nc) * s.plane();
          const T* g = node.grad.data() + static_cast<std::size_t>(nc) * os.plane();
          for (int y = 0; y < os.h; ++y) {
            T* r0 = p + static_cast<std::size_t>(ty.lo[y]) * s.w;
            T* r1 = p + static_cast<std::size_t>(ty.hi[y]) * s.w;
            const T fy = ty.frac[y];
            for (int xx = 0; xx < os.w; ++xx) {
              const T v = g[y * os.w + xx];
              const T fx = tx.frac[xx];
              r0[tx.lo[xx]] += v * (1 - fy) * (1 - fx);
              r0[tx.hi[xx]] += v * (1 - fy) * fx;
              r1[tx.lo[xx]] += v * fy * (1 - fx);
              r1[tx.hi[xx]] += v * fy * fx;
            }
          }
        }
      });
}

template <class T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat_channels: no inputs");
  const Shape first = parts.front().shape();
  int channels = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw DimensionError("concat_channels: " + first.str() + " vs " + s.str());
    }
    channels += s.c;
  }
  const Shape os{first.n, channels, first.h, first.w};
  const std::size_t plane = first.plane();
  std::vector<T> out(os.numel());
  std::vector<int> offsets;
  int offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const int c = p.shape().c;
    for (int n = 0; n < first.n; ++n) {
      std::copy_n(p.raw() + static_cast<std::size_t>(n) * c * plane, c * plane,
                  out.data() + (static_cast<std::size_t>(n) * channels + offset) * plane);
    }
    offset += c;
  }

  std::vector<const Tensor<T>*> inputs;
  for (const auto& p : parts) inputs.push_back(&p);
  return Tensor<T>::make_result(
      os, std::move(out), inputs, [offsets, channels, plane](detail::TensorImpl<T>& node) {
        for (std::size_t k = 0; k < node.inputs.size(); ++k) {
          auto& in = *node.inputs[k];
          if (!in.requires_grad) continue;
          in.ensure_grad();
          const int c = in.shape.c;
          for (int n = 0; n < in.shape.n; ++n) {
            const T* src = node.grad.data() + (static_cast<std::size_t>(n) * channels + offsets[k]) * plane;
            T* dst = in.grad.data() + static_cast<std::size_t>(n) * c * plane;
            for (std::size_t i = 0; i < c * plane; ++i) dst[i] += src[i];
          }
        }
      });
}

#define CIISOD_INSTANTIATE(T)                                                                 \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int); \
  template Tensor<T> batchnorm2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,       \
                                 BatchNormState<T>&, Mode, const BatchNormOptions&);         \
  template Tensor<T> maxpool2d(const Tensor<T>&, int, int);                                  \
  template Tensor<T> global_max_pool(const Tensor<T>&);                                      \
  template Tensor<T> adaptive_avg_pool(const Tensor<T>&, int);                               \
  template Tensor<T> bilinear_resize(const Tensor<T>&, int, int);                            \
  template Tensor<T> concat_channels(const std::vector<Tensor<T>>&);

CIISOD_INSTANTIATE(float)
CIISOD_INSTANTIATE(double)
#undef CIISOD_INSTANTIATE

}  // namespace ciisod
