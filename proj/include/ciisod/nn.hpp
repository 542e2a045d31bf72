#pragma once

#include <cstdint>
#include <vector>

#include "ciisod/tensor.hpp"

namespace ciisod {

/// Output extent of a window op: floor((in + 2*pad - k) / stride) + 1.
/// Throws DimensionError when the padded input is smaller than the window.
int window_output_size(int in, int kernel, int stride, int padding);

/// 2-D cross-correlation with zero padding. weight is (cout, cin, kh, kw)
/// with kh, kw in {1, 3, 7}; bias, when defined, is (1, cout, 1, 1).
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight,
                 const Tensor<T>& bias, int stride, int padding);

template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, int stride,
                 int padding) {
  return conv2d(x, weight, Tensor<T>(), stride, padding);
}

struct BatchNormOptions {
  double eps = 1e-5;
  double momentum = 0.1;
};

/// Running statistics of one batch-norm layer. Owned by a single model.
template <class T>
struct BatchNormState {
  std::vector<T> running_mean;
  std::vector<T> running_var;
  std::int64_t batches_tracked = 0;
  // Set when eval mode ran before any statistics were collected.
  bool eval_without_stats = false;

  explicit BatchNormState(int channels = 0)
      : running_mean(channels, T(0)), running_var(channels, T(1)) {}
};

/// Per-channel normalization. gamma/beta are (1, c, 1, 1). Train mode uses
/// batch statistics (biased variance) and updates the running estimates with
/// the unbiased variance; eval mode uses the running estimates.
template <class T>
Tensor<T> batchnorm2d(const Tensor<T>& x, const Tensor<T>& gamma,
                      const Tensor<T>& beta, BatchNormState<T>& state,
                      Mode mode, const BatchNormOptions& options = {});

/// Max pooling with k in {2, 3}; padding is k/2 for k = 3 and 0 for k = 2.
/// Gradient routes to the first maximum in row-major window order.
template <class T>
Tensor<T> maxpool2d(const Tensor<T>& x, int kernel, int stride);

/// Per-channel spatial maximum -> (n, c, 1, 1). Ties go to the first index.
template <class T>
Tensor<T> global_max_pool(const Tensor<T>& x);

/// Average pooling into bins x bins cells, cell i covering
/// [floor(i*H/bins), ceil((i+1)*H/bins)). Valid for bins > H as well.
template <class T>
Tensor<T> adaptive_avg_pool(const Tensor<T>& x, int bins);

/// Bilinear resampling with half-pixel centres:
/// src = (dst + 0.5) * in/out - 0.5, clamped at the borders.
template <class T>
Tensor<T> bilinear_resize(const Tensor<T>& x, int out_h, int out_w);

/// Concatenation along channels; all parts share n, h, w.
template <class T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts);

}  // namespace ciisod
