#include "rlnst/optim.hpp"

#include <cmath>

namespace rlnst {

template <typename T>
Optimizer<T>::Optimizer(std::vector<Tensor<T>> params, double lr_, OptimizerKind kind_)
    : lr(lr_), kind(kind_), params_(std::move(params)) {
  if (!(lr >= 0)) throw ArgumentError("learning rate must be non-negative");
  for (const auto& p : params_) {
    m_.emplace_back(kind == OptimizerKind::adam ? p.numel() : 0, 0.0);
    v_.emplace_back(kind == OptimizerKind::adam ? p.numel() : 0, 0.0);
  }
}

template <typename T>
void Optimizer<T>::step() {
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(steps_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = params_[k];
    if (!p.has_grad()) continue;
    auto x = p.data();
    const auto g = p.grad();
    if (kind == OptimizerKind::sgd) {
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<T>(x[i] - lr * g[i]);
      continue;
    }
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double gi = g[i];
      m[i] = beta1 * m[i] + (1 - beta1) * gi;
      v[i] = beta2 * v[i] + (1 - beta2) * gi * gi;
      x[i] = static_cast<T>(x[i] - lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + epsilon));
    }
  }
}

template <typename T>
void Optimizer<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template class Optimizer<float>;
template class Optimizer<double>;

}  // namespace rlnst
