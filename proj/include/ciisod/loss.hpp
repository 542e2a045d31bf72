#pragma once

#include "ciisod/tensor.hpp"

namespace ciisod {

inline constexpr double kBceClamp = 1e-7;
inline constexpr double kIouEps = 1e-8;

/// -(1/n) sum[y log x + (1-y) log(1-x)] over every element, x clamped to
/// [1e-7, 1-1e-7]. Gradient is zero where the clamp is active.
template <class T>
Tensor<T> bce_loss(const Tensor<T>& pred, const Tensor<T>& target);

/// 1 - sum(y x) / (sum(y + x - y x) + 1e-8), computed per batch item and
/// averaged over the batch.
template <class T>
Tensor<T> iou_loss(const Tensor<T>& pred, const Tensor<T>& target);

/// bce + iou.
template <class T>
Tensor<T> total_loss(const Tensor<T>& pred, const Tensor<T>& target);

}  // namespace ciisod
