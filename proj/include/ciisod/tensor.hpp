#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ciisod/error.hpp"

namespace ciisod {

/// NCHW extent of a rank-4 tensor.
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

enum class Mode { Train, Eval };

template <class T>
class Tensor;

namespace detail {

template <class T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until first accumulation
  bool requires_grad = false;

  // Graph edge: set only on op outputs created while gradients are recorded.
  // The closure receives the output node and must not capture it.
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::function<void(TensorImpl&)> backward_fn;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
};

}  // namespace detail

/// RAII guard that disables graph recording on the current thread.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

  static bool grad_enabled();

 private:
  bool previous_;
};

/// Handle to a dense NCHW array that can take part in a define-by-run
/// differentiation graph. Copies share storage; use clone() for a deep copy.
template <class T>
class Tensor {
 public:
  using Impl = detail::TensorImpl<T>;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0), bool requires_grad = false);
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static Tensor scalar(T value, bool requires_grad = false) {
    return Tensor(Shape{1, 1, 1, 1}, value, requires_grad);
  }

  bool defined() const { return static_cast<bool>(impl_); }
  const Shape& shape() const { return impl_->shape; }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<T> data() { return impl_->data; }
  std::span<const T> data() const { return impl_->data; }
  T* raw() { return impl_->data.data(); }
  const T* raw() const { return impl_->data.data(); }

  T& at(int n, int c, int y, int x) { return impl_->data[offset(n, c, y, x)]; }
  T at(int n, int c, int y, int x) const {
    return impl_->data[offset(n, c, y, x)];
  }
  T item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool flag);
  bool has_grad() const { return !impl_->grad.empty(); }
  /// Gradient buffer; zeros if nothing has been accumulated yet.
  std::span<const T> grad() const;
  std::span<T> mutable_grad();
  void zero_grad();

  /// True when this tensor was produced by a recorded op.
  bool has_node() const { return static_cast<bool>(impl_->backward_fn); }

  /// Reverse-mode sweep from a (1,1,1,1) tensor. Leaf gradients accumulate
  /// across calls; interior gradients are reset at the start of each sweep.
  void backward() const;

  /// Deep copy of values, detached from any graph.
  Tensor clone() const;
  /// Shares values, drops the graph edge and requires_grad.
  Tensor detach() const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }
  const std::shared_ptr<Impl>& impl() const { return impl_; }

  /// Builds an op output. When recording is on and any input requires grad the
  /// result is attached to the graph with `backward_fn`. Undefined inputs are
  /// kept as null edges so positional indexing in `backward_fn` stays stable.
  static Tensor make_result(Shape shape, std::vector<T> values,
                            const std::vector<const Tensor*>& inputs,
                            std::function<void(Impl&)> backward_fn);

 private:
  std::size_t offset(int n, int c, int y, int x) const {
    const Shape& s = impl_->shape;
    return ((static_cast<std::size_t>(n) * s.c + c) * s.h + y) * s.w + x;
  }

  std::shared_ptr<Impl> impl_;
};

/// Learnable tensor with a hierarchical name. Parameters in the same
/// shared_group share one Tensor storage.
template <class T>
struct Parameter {
  Tensor<T> tensor;
  std::string name;
  std::optional<std::string> shared_group{};
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace ciisod
