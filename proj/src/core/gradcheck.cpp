#include "rlnst/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rlnst {

Tensor<double> finite_diff_gradient(const std::function<double()>& f, Tensor<double>& x,
                                    const std::vector<std::int64_t>& indices, double h) {
  if (!(h > 0.0)) throw ArgumentError("finite_diff_gradient: step must be positive");
  auto grad = Tensor<double>::zeros(x.shape());
  auto values = x.data();
  for (auto i : indices) {
    const double saved = values[i];
    values[i] = saved + h;
    const double plus = f();
    values[i] = saved - h;
    const double minus = f();
    values[i] = saved;
    grad.data()[i] = (plus - minus) / (2.0 * h);
  }
  return grad;
}

Tensor<double> finite_diff_gradient(const std::function<double()>& f, Tensor<double>& x, double h) {
  std::vector<std::int64_t> all(static_cast<std::size_t>(x.numel()));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::int64_t>(i);
  return finite_diff_gradient(f, x, all, h);
}

Tensor<double> finite_diff_gradient(const std::function<double(const Tensor<double>&)>& f,
                                    const Tensor<double>& x, double h) {
  auto probe = x.clone();
  return finite_diff_gradient([&] { return f(probe); }, probe, h);
}

double max_relative_error(std::span<const double> a, std::span<const double> b,
                          const std::vector<std::int64_t>& indices, double rel_floor) {
  if (a.size() != b.size()) throw DimensionError("max_relative_error: length mismatch");
  auto visit = [&](auto&& fn) {
    if (indices.empty()) {
      for (std::size_t i = 0; i < a.size(); ++i) fn(i);
    } else {
      for (auto i : indices) fn(static_cast<std::size_t>(i));
    }
  };
  double scale = 0.0;
  bool finite = true;
  visit([&](std::size_t i) {
    if (!std::isfinite(a[i]) || !std::isfinite(b[i])) finite = false;
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  });
  if (!finite) return std::numeric_limits<double>::infinity();
  const double floor = std::max(rel_floor * scale, std::numeric_limits<double>::min());
  double worst = 0.0;
  visit([&](std::size_t i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  });
  return worst;
}

}  // namespace rlnst
