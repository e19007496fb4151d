#pragma once

#include <functional>
#include <vector>

#include "rlnst/autograd.hpp"
#include "rlnst/gradcheck.hpp"
#include "rlnst/rng.hpp"

namespace rlnst::testing {

using D = Tensor<double>;

inline D make(Shape shape, std::vector<double> values, bool grad = false) {
  return D::from(std::move(shape), std::move(values), grad);
}

inline D random(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0, bool grad = true) {
  auto t = rng.uniform_tensor<double>(std::move(shape), lo, hi);
  t.set_requires_grad(grad);
  return t;
}

// Autodiff gradient of loss(x) w.r.t. x versus central differences.
inline double gradcheck(const std::function<D()>& loss, D& x, double h = 1e-3) {
  x.zero_grad();
  backward(loss());
  std::vector<double> analytic(x.grad().begin(), x.grad().end());
  auto numeric = finite_diff_gradient([&] { return loss().item(); }, x, h);
  return max_relative_error(analytic, numeric.data());
}

}  // namespace rlnst::testing
