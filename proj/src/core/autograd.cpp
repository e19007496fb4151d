#include "rlnst/autograd.hpp"

#include <algorithm>
#include <unordered_set>

namespace rlnst {

template <typename T>
Tape<T> Tape<T>::record(const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        (loss.defined() ? to_string(loss.shape()) : std::string("<undefined>")));
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward() on a loss that does not depend on any differentiable tensor");
  }
  Tape tape;
  tape.loss_ = loss;

  // Iterative post-order DFS; post-order of a DAG is a topological order.
  std::unordered_set<TensorImpl<T>*> visited;
  std::vector<std::pair<TensorImpl<T>*, std::size_t>> stack;
  stack.emplace_back(loss.impl(), 0);
  visited.insert(loss.impl());
  while (!stack.empty()) {
    auto& [impl, next] = stack.back();
    const auto* node = impl->node.get();
    if (node && next < node->inputs.size()) {
      TensorImpl<T>* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
      continue;
    }
    tape.order_.push_back(impl);
    stack.pop_back();
  }
  return tape;
}

template <typename T>
void Tape<T>::run() {
  for (auto* impl : order_) {
    if (impl->node) impl->grad.assign(impl->data.size(), T(0));
  }
  loss_.impl()->grad_buffer()[0] += T(1);
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    TensorImpl<T>* impl = *it;
    if (impl->node && impl->node->backward) impl->node->backward(*impl);
  }
  // Interior gradients are scratch space; drop them so the graph's memory
  // footprint is only the forward values.
  for (auto* impl : order_) {
    if (impl->node && impl != loss_.impl()) Buffer<T>().swap(impl->grad);
  }
}

template <typename T>
void backward(const Tensor<T>& loss) {
  Tape<T>::record(loss).run();
}

namespace detail {

template <typename T>
Tensor<T> make_result(Shape shape, Buffer<T> values, const std::vector<Tensor<T>>& inputs,
                      std::function<void(const TensorImpl<T>&)> rule, const char* name) {
  auto out = Tensor<T>::from_buffer(std::move(shape), std::move(values));
  if (!grad_mode_enabled()) return out;
  bool any = std::any_of(inputs.begin(), inputs.end(), [](const Tensor<T>& t) { return needs_grad(t); });
  if (!any) return out;
  auto node = std::make_shared<Node<T>>();
  for (const auto& t : inputs) {
    if (t.defined()) node->inputs.push_back(t.impl_ptr());
  }
  node->backward = std::move(rule);
  node->name = name;
  out.impl()->node = std::move(node);
  out.impl()->requires_grad = true;
  return out;
}

template Tensor<float> make_result(Shape, Buffer<float>, const std::vector<Tensor<float>>&,
                                   std::function<void(const TensorImpl<float>&)>, const char*);
template Tensor<double> make_result(Shape, Buffer<double>, const std::vector<Tensor<double>>&,
                                    std::function<void(const TensorImpl<double>&)>, const char*);

}  // namespace detail

template class Tape<float>;
template class Tape<double>;
template void backward(const Tensor<float>&);
template void backward(const Tensor<double>&);

}  // namespace rlnst
