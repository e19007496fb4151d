#pragma once

#include <vector>

#include "rlnst/tensor.hpp"

namespace rlnst {

// Linearized view of the graph that produced a scalar loss: every
// differentiable tensor reachable from the loss, inputs before consumers.
template <typename T>
class Tape {
 public:
  static Tape record(const Tensor<T>& loss);

  // Seeds d(loss)/d(loss) = 1 and replays backward rules in reverse order.
  // Gradients of non-leaf tensors are reset first; leaf gradients accumulate.
  void run();

  std::size_t size() const noexcept { return order_.size(); }
  const std::vector<TensorImpl<T>*>& order() const noexcept { return order_; }

 private:
  Tensor<T> loss_;
  std::vector<TensorImpl<T>*> order_;
};

template <typename T>
void backward(const Tensor<T>& loss);

namespace detail {

// Builds an op result. When grad mode is on and any input requires a
// gradient, the result records `rule` for the backward pass.
template <typename T>
Tensor<T> make_result(Shape shape, Buffer<T> values,
                      const std::vector<Tensor<T>>& inputs,
                      std::function<void(const TensorImpl<T>&)> rule, const char* name);

template <typename T>
inline bool needs_grad(const Tensor<T>& t) {
  return t.defined() && t.impl()->requires_grad;
}

}  // namespace detail
}  // namespace rlnst
