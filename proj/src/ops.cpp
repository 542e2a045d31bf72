#include "ciisod/ops.hpp"

#include <algorithm>
#include <cmath>

namespace ciisod {

template <class T>
Tensor<T> elementwise(BinaryOp op, const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  const bool broadcast = sb != sa;
  if (broadcast && !(sb.n == sa.n && sb.c == sa.c && sb.h == 1 && sb.w == 1)) {
    throw DimensionError("elementwise: cannot combine " + sa.str() + " with " +
                         sb.str());
  }
  const std::size_t plane = sa.plane();
  const std::size_t total = sa.numel();
  std::vector<T> out(total);
  const T* pa = a.raw();
  const T* pb = b.raw();
  for (std::size_t i = 0; i < total; ++i) {
    const T bv = broadcast ? pb[i / plane] : pb[i];
    out[i] = op == BinaryOp::Add ? pa[i] + bv : pa[i] * bv;
  }

  return Tensor<T>::make_result(
      sa, std::move(out), {&a, &b},
      [op, broadcast, plane](detail::TensorImpl<T>& node) {
        auto& ia = *node.inputs[0];
        auto& ib = *node.inputs[1];
        const std::vector<T>& g = node.grad;
        const std::size_t total = g.size();
        if (ia.requires_grad) {
          ia.ensure_grad();
          for (std::size_t i = 0; i < total; ++i) {
            const T bv = broadcast ? ib.data[i / plane] : ib.data[i];
            ia.grad[i] += op == BinaryOp::Add ? g[i] : g[i] * bv;
          }
        }
        if (ib.requires_grad) {
          ib.ensure_grad();
          for (std::size_t i = 0; i < total; ++i) {
            const T contrib = op == BinaryOp::Add ? g[i] : g[i] * ia.data[i];
            ib.grad[broadcast ? i / plane : i] += contrib;
          }
        }
      });
}

template <class T>
Tensor<T> activation(Activation op, const Tensor<T>& x) {
  const std::size_t total = x.numel();
  std::vector<T> out(total);
  const T* px = x.raw();
  if (op == Activation::Relu) {
    for (std::size_t i = 0; i < total; ++i) out[i] = px[i] > T(0) ? px[i] : T(0);
  } else {
    // exp argument clamped so saturated inputs give exactly 0 or 1 without overflow.
    for (std::size_t i = 0; i < total; ++i) {
      const T z = std::clamp(px[i], T(-80), T(80));
      out[i] = T(1) / (T(1) + std::exp(-z));
    }
  }
  return Tensor<T>::make_result(
      x.shape(), std::move(out), {&x}, [op](detail::TensorImpl<T>& node) {
        auto& in = *node.inputs[0];
        if (!in.requires_grad) return;
        in.ensure_grad();
        const std::size_t total = node.grad.size();
        if (op == Activation::Relu) {
          for (std::size_t i = 0; i < total; ++i) {
            if (in.data[i] > T(0)) in.grad[i] += node.grad[i];
          }
        } else {
          for (std::size_t i = 0; i < total; ++i) {
            const T s = node.data[i];
            in.grad[i] += node.grad[i] * s * (T(1) - s);
          }
        }
      });
}

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.data()) acc += v;
  return Tensor<T>::make_result(
      Shape{1, 1, 1, 1}, {acc}, {&x}, [](detail::TensorImpl<T>& node) {
        auto& in = *node.inputs[0];
        if (!in.requires_grad) return;
        in.ensure_grad();
        const T g = node.grad[0];
        for (T& v : in.grad) v += g;
      });
}

template <class T>
Tensor<T> weighted_sum(const Tensor<T>& x, const Tensor<T>& weights) {
  if (x.shape() != weights.shape()) {
    throw DimensionError("weighted_sum: " + x.shape().str() + " vs " +
                         weights.shape().str());
  }
  T acc = 0;
  for (std::size_t i = 0; i < x.numel(); ++i) acc += x.raw()[i] * weights.raw()[i];
  return Tensor<T>::make_result(
      Shape{1, 1, 1, 1}, {acc}, {&x, &weights},
      [](detail::TensorImpl<T>& node) {
        auto& in = *node.inputs[0];
        auto& wt = *node.inputs[1];
        const T g = node.grad[0];
        if (in.requires_grad) {
          in.ensure_grad();
          for (std::size_t i = 0; i < in.grad.size(); ++i) in.grad[i] += g * wt.data[i];
        }
        if (wt.requires_grad) {
          wt.ensure_grad();
          for (std::size_t i = 0; i < wt.grad.size(); ++i) wt.grad[i] += g * in.data[i];
        }
      });
}

template <class T>
Tensor<T> add_scalars(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.numel() != 1 || b.numel() != 1) {
    throw DimensionError("add_scalars: " + a.shape().str() + " + " +
                         b.shape().str());
  }
  return Tensor<T>::make_result(
      Shape{1, 1, 1, 1}, {a.item() + b.item()}, {&a, &b},
      [](detail::TensorImpl<T>& node) {
        for (auto& in : node.inputs) {
          if (!in->requires_grad) continue;
          in->ensure_grad();
          in->grad[0] += node.grad[0];
        }
      });
}

#define CIISOD_INSTANTIATE(T)                                                  \
  template Tensor<T> elementwise(BinaryOp, const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> activation(Activation, const Tensor<T>&);                  \
  template Tensor<T> sum(const Tensor<T>&);                                     \
  template Tensor<T> weighted_sum(const Tensor<T>&, const Tensor<T>&);          \
  template Tensor<T> add_scalars(const Tensor<T>&, const Tensor<T>&);

CIISOD_INSTANTIATE(float)
CIISOD_INSTANTIATE(double)
#undef CIISOD_INSTANTIATE

}  // namespace ciisod
