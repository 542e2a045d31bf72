#include "ciisod/layers.hpp"

#include <algorithm>

#include "ciisod/ops.hpp"

namespace ciisod {

namespace {
template <class T>
void push_learnable(StateList<T>& out, std::string name, Tensor<T>& t) {
  StateEntry<T> e;
  e.name = std::move(name);
  e.shape = t.shape();
  e.values = t.raw();
  e.learnable = true;
  e.tensor = t;
  out.push_back(std::move(e));
}

template <class T>
void push_buffer(StateList<T>& out, std::string name, std::vector<T>& values) {
  StateEntry<T> e;
  e.name = std::move(name);
  e.shape = Shape{1, static_cast<int>(values.size()), 1, 1};
  e.values = values.data();
  out.push_back(std::move(e));
}
}  // namespace

template <class T>
Conv<T>::Conv(Initializer& init, int cin, int cout, int kernel, int stride_,
              bool with_bias, double gain)
    : weight(init.kaiming<T>(Shape{cout, cin, kernel, kernel}, gain)),
      stride(stride_),
      padding(kernel / 2) {
  if (with_bias) bias = Tensor<T>(Shape{1, cout, 1, 1}, T(0), true);
}

template <class T>
void Conv<T>::collect(StateList<T>& out, const std::string& prefix) {
  push_learnable(out, prefix + ".weight", weight);
  if (bias.defined()) push_learnable(out, prefix + ".bias", bias);
}

template <class T>
BatchNorm<T>::BatchNorm(int channels)
    : gamma(Shape{1, channels, 1, 1}, T(1), true),
      beta(Shape{1, channels, 1, 1}, T(0), true),
      state(channels) {}

template <class T>
void BatchNorm<T>::collect(StateList<T>& out, const std::string& prefix) {
  push_learnable(out, prefix + ".gamma", gamma);
  push_learnable(out, prefix + ".beta", beta);
  push_buffer(out, prefix + ".running_mean", state.running_mean);
  out.back().batches_tracked = &state.batches_tracked;
  push_buffer(out, prefix + ".running_var", state.running_var);
}

template <class T>
ConvBnRelu<T>::ConvBnRelu(Initializer& init, int cin, int cout, int kernel,
                          int stride, bool relu_)
    : conv(init, cin, cout, kernel, stride), bn(cout), relu(relu_) {}

template <class T>
Tensor<T> ConvBnRelu<T>::forward(const Tensor<T>& x, Mode mode) {
  Tensor<T> y = bn.forward(conv.forward(x), mode);
  return relu ? ciisod::relu(y) : y;
}

template <class T>
void ConvBnRelu<T>::collect(StateList<T>& out, const std::string& prefix) {
  conv.collect(out, prefix + ".conv");
  bn.collect(out, prefix + ".bn");
}

template <class T>
ConvStack<T>::ConvStack(Initializer& init, int channels, int kernel, int depth) {
  for (int i = 0; i < depth; ++i) layers.emplace_back(init, channels, channels, kernel);
}

template <class T>
Tensor<T> ConvStack<T>::forward(const Tensor<T>& x, Mode mode) {
  Tensor<T> y = x;
  for (auto& layer : layers) y = layer.forward(y, mode);
  return y;
}

template <class T>
void ConvStack<T>::collect(StateList<T>& out, const std::string& prefix) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].collect(out, prefix + "." + std::to_string(i));
  }
}

template <class T>
void zero_conv_weights(StateList<T>& entries) {
  for (auto& e : entries) {
    if (!e.learnable) continue;
    const bool conv = e.name.ends_with(".weight") || e.name.ends_with(".bias");
    if (conv) std::fill(e.values, e.values + e.count(), T(0));
  }
}

template struct Conv<float>;
template struct Conv<double>;
template struct BatchNorm<float>;
template struct BatchNorm<double>;
template struct ConvBnRelu<float>;
template struct ConvBnRelu<double>;
template struct ConvStack<float>;
template struct ConvStack<double>;
template void zero_conv_weights(StateList<float>&);
template void zero_conv_weights(StateList<double>&);

}  // namespace ciisod
