#include "ciisod/loss.hpp"

#include <algorithm>
#include <cmath>

#include "ciisod/ops.hpp"

namespace ciisod {

namespace {
void check_same(const Shape& a, const Shape& b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": prediction " + a.str() + " vs target " + b.str());
  }
}
}  // namespace

template <class T>
Tensor<T> bce_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  check_same(pred.shape(), target.shape(), "bce_loss");
  const T lo = static_cast<T>(kBceClamp);
  const T hi = static_cast<T>(1.0 - kBceClamp);
  const std::size_t n = pred.numel();
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::clamp(pred.raw()[i], lo, hi);
    const double y = target.raw()[i];
    acc -= y * std::log(x) + (1 - y) * std::log(1 - x);
  }
  return Tensor<T>::make_result(
      Shape{1, 1, 1, 1}, {static_cast<T>(acc / n)}, {&pred, &target},
      [lo, hi](detail::TensorImpl<T>& node) {
        auto& in = *node.inputs[0];
        auto& tg = *node.inputs[1];
        const std::size_t n = in.data.size();
        const T g = node.grad[0] / static_cast<T>(n);
        if (in.requires_grad) {
          in.ensure_grad();
          for (std::size_t i = 0; i < n; ++i) {
            const T x = in.data[i];
            if (x < lo || x > hi) continue;
            const T y = tg.data[i];
            in.grad[i] += g * (-y / x + (1 - y) / (1 - x));
          }
        }
        if (tg.requires_grad) {
          tg.ensure_grad();
          for (std::size_t i = 0; i < n; ++i) {
            const T x = std::clamp(in.data[i], lo, hi);
            tg.grad[i] += g * (std::log(1 - x) - std::log(x));
          }
        }
      });
}

template <class T>
Tensor<T> iou_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  check_same(pred.shape(), target.shape(), "iou_loss");
  const Shape& s = pred.shape();
  const std::size_t per_item = s.numel() / std::max(s.n, 1);
  std::vector<T> inter(s.n), uni(s.n);
  double acc = 0;
  for (int b = 0; b < s.n; ++b) {
    double i_sum = 0, u_sum = 0;
    for (std::size_t k = b * per_item; k < (b + 1) * per_item; ++k) {
      const double x = pred.raw()[k], y = target.raw()[k];
      i_sum += y * x;
      u_sum += y + x - y * x;
    }
    inter[b] = static_cast<T>(i_sum);
    uni[b] = static_cast<T>(u_sum + kIouEps);
    acc += 1.0 - i_sum / (u_sum + kIouEps);
  }
  return Tensor<T>::make_result(
      Shape{1, 1, 1, 1}, {static_cast<T>(acc / s.n)}, {&pred, &target},
      [inter = std::move(inter), uni = std::move(uni), per_item](detail::TensorImpl<T>& node) {
        auto& in = *node.inputs[0];
        auto& tg = *node.inputs[1];
        const int batch = in.shape.n;
        const T g = node.grad[0] / static_cast<T>(batch);
        // d/dx [-I/U] = -(dI U - I dU) / U^2, dI/dx = y, dU/dx = 1 - y.
        if (in.requires_grad) in.ensure_grad();
        if (tg.requires_grad) tg.ensure_grad();
        for (int b = 0; b < batch; ++b) {
          const T I = inter[b], U = uni[b];
          for (std::size_t k = b * per_item; k < (b + 1) * per_item; ++k) {
            const T x = in.data[k], y = tg.data[k];
            if (in.requires_grad) in.grad[k] += g * -(y * U - I * (1 - y)) / (U * U);
            if (tg.requires_grad) tg.grad[k] += g * -(x * U - I * (1 - x)) / (U * U);
          }
        }
      });
}

template <class T>
Tensor<T> total_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  return add_scalars(bce_loss(pred, target), iou_loss(pred, target));
}

#define CIISOD_INSTANTIATE(T)                                            \
  template Tensor<T> bce_loss(const Tensor<T>&, const Tensor<T>&);       \
  template Tensor<T> iou_loss(const Tensor<T>&, const Tensor<T>&);       \
  template Tensor<T> total_loss(const Tensor<T>&, const Tensor<T>&);

CIISOD_INSTANTIATE(float)
CIISOD_INSTANTIATE(double)
#undef CIISOD_INSTANTIATE

}  // namespace ciisod
