#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rlnst/tensor.hpp"

namespace rlnst {

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every element of x.
// x is perturbed in place and restored, so f may read it through any alias
// (a network parameter, a captured input).
Tensor<double> finite_diff_gradient(const std::function<double()>& f, Tensor<double>& x, double h = 1e-3);

// Same as above but only at the listed flat indices; other entries are 0.
Tensor<double> finite_diff_gradient(const std::function<double()>& f, Tensor<double>& x,
                                    const std::vector<std::int64_t>& indices, double h = 1e-3);

// Functional form for f: Tensor -> scalar; x itself is left untouched.
Tensor<double> finite_diff_gradient(const std::function<double(const Tensor<double>&)>& f,
                                    const Tensor<double>& x, double h = 1e-3);

// Largest elementwise |a - b| / max(|a|, |b|, floor), where
// floor = rel_floor * max(|a|_inf, |b|_inf). Components far below the
// gradient's own scale are judged against that scale instead of their own.
// Restricted to `indices` when given.
double max_relative_error(std::span<const double> a, std::span<const double> b,
                          const std::vector<std::int64_t>& indices = {}, double rel_floor = 1e-3);

struct GradCheckResult {
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  double step = 1e-3;
  bool passed() const { return max_rel_error <= tolerance; }
};

}  // namespace rlnst
