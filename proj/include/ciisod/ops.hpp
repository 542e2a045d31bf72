#pragma once

#include "ciisod/tensor.hpp"

namespace ciisod {

enum class BinaryOp { Add, Mul };
enum class Activation { Relu, Sigmoid };

/// a (op) b. `b` is either a's shape or (n, c, 1, 1), broadcast over space.
template <class T>
Tensor<T> elementwise(BinaryOp op, const Tensor<T>& a, const Tensor<T>& b);

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(BinaryOp::Add, a, b);
}
template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(BinaryOp::Mul, a, b);
}

template <class T>
Tensor<T> activation(Activation op, const Tensor<T>& x);

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  return activation(Activation::Relu, x);
}
template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return activation(Activation::Sigmoid, x);
}

/// Sum of every element, as a (1,1,1,1) tensor.
template <class T>
Tensor<T> sum(const Tensor<T>& x);

/// Sum of x * weights where `weights` is a constant of x's shape. Used to
/// build non-degenerate scalar probes of an op's output.
template <class T>
Tensor<T> weighted_sum(const Tensor<T>& x, const Tensor<T>& weights);

/// Sum of two scalar tensors.
template <class T>
Tensor<T> add_scalars(const Tensor<T>& a, const Tensor<T>& b);

}  // namespace ciisod
