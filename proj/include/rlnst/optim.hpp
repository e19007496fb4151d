#pragma once

#include <vector>

#include "rlnst/tensor.hpp"

namespace rlnst {

enum class OptimizerKind { adam, sgd };

// First-order update over a fixed parameter list. Parameters without a
// gradient buffer are skipped.
template <typename T>
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(std::vector<Tensor<T>> params, double lr, OptimizerKind kind);

  void step();
  void zero_grad();

  double lr = 0.0;
  OptimizerKind kind = OptimizerKind::adam;
  double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;

  const std::vector<Tensor<T>>& params() const { return params_; }

 private:
  std::vector<Tensor<T>> params_;
  std::vector<std::vector<double>> m_, v_;
  long steps_ = 0;
};

}  // namespace rlnst
