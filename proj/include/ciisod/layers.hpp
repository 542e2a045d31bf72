#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "ciisod/nn.hpp"
#include "ciisod/rng.hpp"

namespace ciisod {

/// One named entry of a model's persistent state: a learnable tensor or a
/// batch-norm running statistic.
template <class T>
struct StateEntry {
  std::string name;
  Shape shape;
  T* values = nullptr;
  bool learnable = false;
  Tensor<T> tensor;        // defined for learnable entries
  std::string component;   // backbone | projections | body | decoder | head
  std::optional<std::string> shared_group{};
  // Set on BN running_mean entries; persisted next to the statistics.
  std::int64_t* batches_tracked = nullptr;

  std::size_t count() const { return shape.numel(); }
};

template <class T>
using StateList = std::vector<StateEntry<T>>;

/// Kaiming fan-in initialization source. Values are drawn in double and then
/// rounded, so float and double models built from one seed agree.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed, "init") {}

  template <class T>
  Tensor<T> kaiming(Shape shape, double gain = 2.0) {
    const double fan_in = static_cast<double>(shape.c) * shape.h * shape.w;
    const double stddev = std::sqrt(gain / fan_in);
    std::vector<T> values(shape.numel());
    for (T& v : values) v = static_cast<T>(rng_.normal(0.0, stddev));
    return Tensor<T>(shape, std::move(values), true);
  }

 private:
  Rng rng_;
};

template <class T>
struct Conv {
  Tensor<T> weight;  // (cout, cin, k, k)
  Tensor<T> bias;    // (1, cout, 1, 1) or undefined
  int stride = 1;
  int padding = 0;

  Conv() = default;
  Conv(Initializer& init, int cin, int cout, int kernel, int stride = 1,
       bool with_bias = false, double gain = 2.0);

  int in_channels() const { return weight.shape().c; }
  int out_channels() const { return weight.shape().n; }
  int kernel() const { return weight.shape().h; }

  Tensor<T> forward(const Tensor<T>& x) const {
    return conv2d(x, weight, bias, stride, padding);
  }
  void collect(StateList<T>& out, const std::string& prefix);
};

template <class T>
struct BatchNorm {
  Tensor<T> gamma;  // (1, c, 1, 1)
  Tensor<T> beta;
  BatchNormState<T> state;
  BatchNormOptions options;

  BatchNorm() = default;
  explicit BatchNorm(int channels);

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    return batchnorm2d(x, gamma, beta, state, mode, options);
  }
  void collect(StateList<T>& out, const std::string& prefix);
};

/// conv -> BN -> optional ReLU; the unit every interactor and decoder layer
/// is built from. Convolutions feeding BN carry no bias.
template <class T>
struct ConvBnRelu {
  Conv<T> conv;
  BatchNorm<T> bn;
  bool relu = true;

  ConvBnRelu() = default;
  ConvBnRelu(Initializer& init, int cin, int cout, int kernel, int stride = 1,
             bool relu = true);

  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  void collect(StateList<T>& out, const std::string& prefix);
};

/// Sequence of ConvBnRelu units with stride 1 and same padding.
template <class T>
struct ConvStack {
  std::vector<ConvBnRelu<T>> layers;

  ConvStack() = default;
  ConvStack(Initializer& init, int channels, int kernel, int depth);

  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  void collect(StateList<T>& out, const std::string& prefix);
};

/// Sets every learnable conv weight and bias in `entries` to zero (BN affine
/// parameters are left alone).
template <class T>
void zero_conv_weights(StateList<T>& entries);

}  // namespace ciisod
