#include "ciisod/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace ciisod {

std::string Shape::str() const {
  std::ostringstream os;
  os << "(" << n << "," << c << "," << h << "," << w << ")";
  return os.str();
}

namespace {
thread_local bool g_grad_enabled = true;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool NoGradGuard::grad_enabled() { return g_grad_enabled; }

template <class T>
Tensor<T>::Tensor(Shape shape, T fill, bool requires_grad)
    : impl_(std::make_shared<Impl>()) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
    throw DimensionError("negative extent in shape " + shape.str());
  }
  impl_->shape = shape;
  impl_->data.assign(shape.numel(), fill);
  impl_->requires_grad = requires_grad;
}

template <class T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values, bool requires_grad)
    : impl_(std::make_shared<Impl>()) {
  if (values.size() != shape.numel()) {
    throw DimensionError("value count " + std::to_string(values.size()) +
                         " does not match shape " + shape.str());
  }
  impl_->shape = shape;
  impl_->data = std::move(values);
  impl_->requires_grad = requires_grad;
}

template <class T>
T Tensor<T>::item() const {
  if (numel() != 1) {
    throw ContractError("item() on tensor of shape " + shape().str());
  }
  return impl_->data[0];
}

template <class T>
void Tensor<T>::set_requires_grad(bool flag) {
  impl_->requires_grad = flag;
  if (!flag) impl_->grad.clear();
}

template <class T>
std::span<const T> Tensor<T>::grad() const {
  impl_->ensure_grad();
  return impl_->grad;
}

template <class T>
std::span<T> Tensor<T>::mutable_grad() {
  impl_->ensure_grad();
  return impl_->grad;
}

template <class T>
void Tensor<T>::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
}

template <class T>
Tensor<T> Tensor<T>::clone() const {
  return Tensor(impl_->shape, impl_->data, false);
}

template <class T>
Tensor<T> Tensor<T>::detach() const {
  Tensor out;
  out.impl_ = std::make_shared<Impl>();
  out.impl_->shape = impl_->shape;
  out.impl_->data = impl_->data;
  return out;
}

template <class T>
Tensor<T> Tensor<T>::make_result(Shape shape, std::vector<T> values,
                                 const std::vector<const Tensor*>& inputs,
                                 std::function<void(Impl&)> backward_fn) {
  Tensor out(shape, std::move(values), false);
  if (!NoGradGuard::grad_enabled()) return out;
  bool any = false;
  for (const Tensor* in : inputs) any = any || (in->defined() && in->requires_grad());
  if (!any) return out;
  out.impl_->requires_grad = true;
  out.impl_->inputs.reserve(inputs.size());
  for (const Tensor* in : inputs) out.impl_->inputs.push_back(in->impl_);
  out.impl_->backward_fn = std::move(backward_fn);
  return out;
}

template <class T>
void Tensor<T>::backward() const {
  if (impl_->shape != Shape{1, 1, 1, 1}) {
    throw ContractError("backward() requires a scalar (1,1,1,1) loss, got " +
                        impl_->shape.str());
  }
  if (!impl_->requires_grad) {
    throw ContractError("backward() on a tensor that does not require grad");
  }

  // Iterative post-order DFS gives a topological order (inputs first).
  std::vector<Impl*> order;
  std::unordered_set<Impl*> visited;
  std::vector<std::pair<Impl*, std::size_t>> stack{{impl_.get(), 0}};
  visited.insert(impl_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Impl* child = node->inputs[next++].get();
      if (child && child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Impl* node : order) {
    if (node->backward_fn) node->grad.assign(node->data.size(), T(0));
  }
  impl_->ensure_grad();
  impl_->grad[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Impl* node = *it;
    if (node->backward_fn) node->backward_fn(*node);
  }
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace ciisod
