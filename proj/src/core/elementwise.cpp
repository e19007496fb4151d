#include <cmath>

#include "detail.hpp"
#include "rlnst/ops.hpp"

namespace rlnst {

using detail::grad_of;
using detail::make_result;

namespace {

bool is_binary(Elementwise k) {
  return k == Elementwise::add || k == Elementwise::sub || k == Elementwise::mul ||
         k == Elementwise::div;
}

const char* kind_name(Elementwise k) {
  switch (k) {
    case Elementwise::add: return "add";
    case Elementwise::sub: return "sub";
    case Elementwise::mul: return "mul";
    case Elementwise::div: return "div";
    case Elementwise::exp: return "exp";
    case Elementwise::log: return "log";
    case Elementwise::relu: return "relu";
    case Elementwise::sigmoid: return "sigmoid";
    case Elementwise::tanh: return "tanh";
    case Elementwise::square: return "square";
    case Elementwise::abs: return "abs";
  }
  return "?";
}

// y broadcasts into x when it is a single element, or when, after left-padding
// its shape with ones, the leading extents are 1 and the rest match x.
bool broadcastable(const Shape& x, const Shape& y) {
  if (x == y) return true;
  if (numel_of(y) == 1) return true;
  if (y.size() > x.size()) return false;
  const std::size_t offset = x.size() - y.size();
  std::size_t first_full = y.size();
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 1) {
      first_full = i;
      break;
    }
  }
  for (std::size_t i = first_full; i < y.size(); ++i) {
    if (y[i] != x[i + offset]) return false;
  }
  return true;
}

}  // namespace

template <typename T>
Tensor<T> elementwise(Elementwise kind, const Tensor<T>& x, const Tensor<T>& y) {
  if (!is_binary(kind)) {
    throw ArgumentError(std::string("elementwise ") + kind_name(kind) + " takes one operand");
  }
  if (!broadcastable(x.shape(), y.shape())) {
    throw DimensionError(std::string("elementwise ") + kind_name(kind) + ": shapes " +
                         to_string(x.shape()) + " and " + to_string(y.shape()) + " do not match");
  }
  const auto xs = x.data();
  const auto ys = y.data();
  const std::size_t n = xs.size();
  const std::size_t m = ys.size();
  Buffer<T> out(n);
  switch (kind) {
    case Elementwise::add:
      for (std::size_t i = 0; i < n; ++i) out[i] = xs[i] + ys[i % m];
      break;
    case Elementwise::sub:
      for (std::size_t i = 0; i < n; ++i) out[i] = xs[i] - ys[i % m];
      break;
    case Elementwise::mul:
      for (std::size_t i = 0; i < n; ++i) out[i] = xs[i] * ys[i % m];
      break;
    case Elementwise::div:
      for (std::size_t j = 0; j < m; ++j) {
        if (ys[j] == T(0)) throw DomainError("elementwise div: division by zero");
      }
      for (std::size_t i = 0; i < n; ++i) out[i] = xs[i] / ys[i % m];
      break;
    default:
      break;
  }
  return make_result<T>(
      x.shape(), std::move(out), {x, y},
      [x, y, kind](const TensorImpl<T>& o) {
        auto* gx = grad_of(x);
        auto* gy = grad_of(y);
        const auto& g = o.grad;
        const auto xs = x.data();
        const auto ys = y.data();
        const std::size_t n = g.size();
        const std::size_t m = ys.size();
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t j = i % m;
          switch (kind) {
            case Elementwise::add:
              if (gx) (*gx)[i] += g[i];
              if (gy) (*gy)[j] += g[i];
              break;
            case Elementwise::sub:
              if (gx) (*gx)[i] += g[i];
              if (gy) (*gy)[j] -= g[i];
              break;
            case Elementwise::mul:
              if (gx) (*gx)[i] += g[i] * ys[j];
              if (gy) (*gy)[j] += g[i] * xs[i];
              break;
            case Elementwise::div:
              if (gx) (*gx)[i] += g[i] / ys[j];
              if (gy) (*gy)[j] -= g[i] * xs[i] / (ys[j] * ys[j]);
              break;
            default:
              break;
          }
        }
      },
      kind_name(kind));
}

template <typename T>
Tensor<T> elementwise(Elementwise kind, const Tensor<T>& x, T y) {
  if (!is_binary(kind)) {
    throw ArgumentError(std::string("elementwise ") + kind_name(kind) + " takes one operand");
  }
  if (kind == Elementwise::div && y == T(0)) throw DomainError("elementwise div: division by zero");
  const auto xs = x.data();
  Buffer<T> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    switch (kind) {
      case Elementwise::add: out[i] = xs[i] + y; break;
      case Elementwise::sub: out[i] = xs[i] - y; break;
      case Elementwise::mul: out[i] = xs[i] * y; break;
      case Elementwise::div: out[i] = xs[i] / y; break;
      default: break;
    }
  }
  return make_result<T>(
      x.shape(), std::move(out), {x},
      [x, y, kind](const TensorImpl<T>& o) {
        auto* gx = grad_of(x);
        if (!gx) return;
        T scale = T(1);
        if (kind == Elementwise::mul) scale = y;
        if (kind == Elementwise::div) scale = T(1) / y;
        for (std::size_t i = 0; i < o.grad.size(); ++i) (*gx)[i] += o.grad[i] * scale;
      },
      kind_name(kind));
}

template <typename T>
Tensor<T> elementwise(Elementwise kind, const Tensor<T>& x) {
  if (is_binary(kind)) {
    throw ArgumentError(std::string("elementwise ") + kind_name(kind) + " needs two operands");
  }
  const auto xs = x.data();
  const std::size_t n = xs.size();
  Buffer<T> out(n);
  switch (kind) {
    case Elementwise::exp:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(xs[i]);
      break;
    case Elementwise::log:
      for (std::size_t i = 0; i < n; ++i) {
        if (!(xs[i] > T(0))) throw DomainError("elementwise log of nonpositive value");
        out[i] = std::log(xs[i]);
      }
      break;
    case Elementwise::relu:
      for (std::size_t i = 0; i < n; ++i) out[i] = xs[i] > T(0) ? xs[i] : T(0);
      break;
    case Elementwise::sigmoid:
      for (std::size_t i = 0; i < n; ++i) {
        // Split by sign so exp never overflows.
        if (xs[i] >= T(0)) {
          out[i] = T(1) / (T(1) + std::exp(-xs[i]));
        } else {
          const T e = std::exp(xs[i]);
          out[i] = e / (T(1) + e);
        }
      }
      break;
    case Elementwise::tanh:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(xs[i]);
      break;
    case Elementwise::square:
      for (std::size_t i = 0; i < n; ++i) out[i] = xs[i] * xs[i];
      break;
    case Elementwise::abs:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::abs(xs[i]);
      break;
    default:
      break;
  }
  // The rule reads the forward output through `o.data`.
  return make_result<T>(
      x.shape(), std::move(out), {x},
      [x, kind](const TensorImpl<T>& o) {
        auto* gx = grad_of(x);
        if (!gx) return;
        const auto xs = x.data();
        const auto& g = o.grad;
        const auto& y = o.data;
        for (std::size_t i = 0; i < g.size(); ++i) {
          T d = T(0);
          switch (kind) {
            case Elementwise::exp: d = y[i]; break;
            case Elementwise::log: d = T(1) / xs[i]; break;
            case Elementwise::relu: d = xs[i] > T(0) ? T(1) : T(0); break;
            case Elementwise::sigmoid: d = y[i] * (T(1) - y[i]); break;
            case Elementwise::tanh: d = T(1) - y[i] * y[i]; break;
            case Elementwise::square: d = T(2) * xs[i]; break;
            case Elementwise::abs: d = xs[i] > T(0) ? T(1) : (xs[i] < T(0) ? T(-1) : T(0)); break;
            default: break;
          }
          (*gx)[i] += g[i] * d;
        }
      },
      kind_name(kind));
}

template <typename T>
Tensor<T> rsub(T s, const Tensor<T>& x) {
  return elementwise(Elementwise::add, elementwise(Elementwise::mul, x, T(-1)), s);
}

template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  const auto xs = x.data();
  Buffer<T> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = std::min(std::max(xs[i], lo), hi);
  return make_result<T>(
      x.shape(), std::move(out), {x},
      [x, lo, hi](const TensorImpl<T>& o) {
        auto* gx = grad_of(x);
        if (!gx) return;
        const auto xs = x.data();
        for (std::size_t i = 0; i < o.grad.size(); ++i) {
          if (xs[i] >= lo && xs[i] <= hi) (*gx)[i] += o.grad[i];
        }
      },
      "clamp");
}

#define RLNST_INSTANTIATE(T)                                                               \
  template Tensor<T> elementwise(Elementwise, const Tensor<T>&, const Tensor<T>&);         \
  template Tensor<T> elementwise(Elementwise, const Tensor<T>&, T);                        \
  template Tensor<T> elementwise(Elementwise, const Tensor<T>&);                           \
  template Tensor<T> rsub(T, const Tensor<T>&);                                            \
  template Tensor<T> clamp(const Tensor<T>&, T, T);

RLNST_INSTANTIATE(float)
RLNST_INSTANTIATE(double)
#undef RLNST_INSTANTIATE

}  // namespace rlnst
