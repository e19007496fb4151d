#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Core>

#include "detail.hpp"
#include "rlnst/ops.hpp"

namespace rlnst {

using detail::grad_of;
using detail::make_result;

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  const auto xs = x.data();
  T total = std::accumulate(xs.begin(), xs.end(), T(0));
  return make_result<T>(
      {}, {total}, {x},
      [x](const TensorImpl<T>& o) {
        auto* gx = grad_of(x);
        if (!gx) return;
        for (auto& v : *gx) v += o.grad[0];
      },
      "sum");
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return elementwise(Elementwise::div, sum(x), static_cast<T>(x.numel()));
}

template <typename T>
Tensor<T> sum_per_item(const Tensor<T>& x) {
  if (x.rank() < 1) throw DimensionError("sum_per_item needs a batch axis");
  const std::int64_t n = x.dim(0);
  const std::int64_t inner = x.numel() / n;
  const auto xs = x.data();
  Buffer<T> out(static_cast<std::size_t>(n), T(0));
  for (std::int64_t b = 0; b < n; ++b) {
    out[b] = std::accumulate(xs.begin() + b * inner, xs.begin() + (b + 1) * inner, T(0));
  }
  return make_result<T>(
      {n}, std::move(out), {x},
      [x, inner](const TensorImpl<T>& o) {
        auto* gx = grad_of(x);
        if (!gx) return;
        for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += o.grad[i / inner];
      },
      "sum_per_item");
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel_of(shape) != x.numel()) {
    throw DimensionError("reshape " + to_string(x.shape()) + " -> " + to_string(shape));
  }
  Buffer<T> out(x.data().begin(), x.data().end());
  return make_result<T>(
      std::move(shape), std::move(out), {x},
      [x](const TensorImpl<T>& o) {
        auto* gx = grad_of(x);
        if (!gx) return;
        for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += o.grad[i];
      },
      "reshape");
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  detail::require_rank(x, 2, "transpose");
  const auto r = x.dim(0), c = x.dim(1);
  Buffer<T> out(x.data().size());
  Eigen::Map<RowMat<T>>(out.data(), c, r) = Eigen::Map<const RowMat<T>>(x.data().data(), r, c).transpose();
  return make_result<T>(
      {c, r}, std::move(out), {x},
      [x, r, c](const TensorImpl<T>& o) {
        auto* gx = grad_of(x);
        if (!gx) return;
        Eigen::Map<RowMat<T>>(gx->data(), r, c) += Eigen::Map<const RowMat<T>>(o.grad.data(), c, r).transpose();
      },
      "transpose");
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_rank(a, 2, "matmul");
  detail::require_rank(b, 2, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: inner extents differ, " + to_string(a.shape()) + " x " +
                         to_string(b.shape()));
  }
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Buffer<T> out(static_cast<std::size_t>(m * n));
  Eigen::Map<RowMat<T>>(out.data(), m, n).noalias() =
      Eigen::Map<const RowMat<T>>(a.data().data(), m, k) * Eigen::Map<const RowMat<T>>(b.data().data(), k, n);
  return make_result<T>(
      {m, n}, std::move(out), {a, b},
      [a, b, m, k, n](const TensorImpl<T>& o) {
        Eigen::Map<const RowMat<T>> g(o.grad.data(), m, n);
        if (auto* ga = grad_of(a)) {
          Eigen::Map<RowMat<T>>(ga->data(), m, k).noalias() += g * Eigen::Map<const RowMat<T>>(b.data().data(), k, n).transpose();
        }
        if (auto* gb = grad_of(b)) {
          Eigen::Map<RowMat<T>>(gb->data(), k, n).noalias() += Eigen::Map<const RowMat<T>>(a.data().data(), m, k).transpose() * g;
        }
      },
      "matmul");
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw ArgumentError("concat of zero tensors");
  const Shape& ref = parts.front().shape();
  if (axis >= ref.size()) throw DimensionError("concat axis out of range for " + to_string(ref));
  Shape out_shape = ref;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == ref.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == ref[i];
    if (!ok) throw DimensionError("concat: " + to_string(s) + " incompatible with " + to_string(ref));
    out_shape[axis] += s[axis];
  }
  std::int64_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= ref[i];
  for (std::size_t i = axis + 1; i < ref.size(); ++i) inner *= ref[i];
  const std::int64_t out_block = out_shape[axis] * inner;

  Buffer<T> out(static_cast<std::size_t>(outer * out_block));
  std::int64_t offset = 0;
  for (const auto& p : parts) {
    const std::int64_t block = p.dim(axis) * inner;
    const auto src = p.data();
    for (std::int64_t o = 0; o < outer; ++o) {
      std::copy(src.begin() + o * block, src.begin() + (o + 1) * block, out.begin() + o * out_block + offset);
    }
    offset += block;
  }
  return make_result<T>(
      std::move(out_shape), std::move(out), parts,
      [parts, outer, out_block](const TensorImpl<T>& o) {
        std::int64_t offset = 0;
        for (const auto& p : parts) {
          const std::int64_t block = p.numel() / outer;
          if (auto* gp = grad_of(p)) {
            for (std::int64_t b = 0; b < outer; ++b) {
              for (std::int64_t i = 0; i < block; ++i) (*gp)[b * block + i] += o.grad[b * out_block + offset + i];
            }
          }
          offset += block;
        }
      },
      "concat");
}

template <typename T>
Tensor<T> select_item(const Tensor<T>& x, std::int64_t i) {
  if (x.rank() < 1 || i < 0 || i >= x.dim(0)) {
    throw DimensionError("select_item " + std::to_string(i) + " from " + to_string(x.shape()));
  }
  Shape shape = x.shape();
  shape[0] = 1;
  const std::int64_t inner = x.numel() / x.dim(0);
  Buffer<T> out(x.data().begin() + i * inner, x.data().begin() + (i + 1) * inner);
  return make_result<T>(
      std::move(shape), std::move(out), {x},
      [x, i, inner](const TensorImpl<T>& o) {
        auto* gx = grad_of(x);
        if (!gx) return;
        for (std::int64_t k = 0; k < inner; ++k) (*gx)[i * inner + k] += o.grad[k];
      },
      "select_item");
}

template <typename T>
Tensor<T> pad_reflect(const Tensor<T>& x, std::int64_t bottom, std::int64_t right) {
  detail::require_rank(x, 4, "pad_reflect");
  const auto n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (bottom < 0 || right < 0 || bottom >= h || right >= w) {
    throw ArgumentError("pad_reflect: padding must be smaller than the image");
  }
  const auto oh = h + bottom, ow = w + right;
  auto out = Tensor<T>::zeros({n, c, oh, ow});
  auto dst = out.data();
  const auto src = x.data();
  for (std::int64_t p = 0; p < n * c; ++p) {
    for (std::int64_t y = 0; y < oh; ++y) {
      const auto sy = y < h ? y : 2 * (h - 1) - y;
      for (std::int64_t xx = 0; xx < ow; ++xx) {
        const auto sx = xx < w ? xx : 2 * (w - 1) - xx;
        dst[(p * oh + y) * ow + xx] = src[(p * h + sy) * w + sx];
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> crop(const Tensor<T>& x, std::int64_t h, std::int64_t w) {
  detail::require_rank(x, 4, "crop");
  const auto n = x.dim(0), c = x.dim(1), ih = x.dim(2), iw = x.dim(3);
  if (h > ih || w > iw || h <= 0 || w <= 0) throw ArgumentError("crop larger than source");
  auto out = Tensor<T>::zeros({n, c, h, w});
  auto dst = out.data();
  const auto src = x.data();
  for (std::int64_t p = 0; p < n * c; ++p) {
    for (std::int64_t y = 0; y < h; ++y) {
      std::copy_n(src.begin() + (p * ih + y) * iw, w, dst.begin() + (p * h + y) * w);
    }
  }
  return out;
}

template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& x, std::int64_t oh, std::int64_t ow) {
  detail::require_rank(x, 4, "resize_bilinear");
  if (oh <= 0 || ow <= 0) throw ArgumentError("resize_bilinear: target size must be positive");
  const auto n = x.dim(0), c = x.dim(1), ih = x.dim(2), iw = x.dim(3);
  struct Tap {
    std::int64_t lo, hi;
    double frac;
  };
  auto taps = [](std::int64_t in, std::int64_t out) {
    std::vector<Tap> t(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::int64_t i = 0; i < out; ++i) {
      const double src = std::clamp((static_cast<double>(i) + 0.5) * scale - 0.5, 0.0, static_cast<double>(in - 1));
      const auto lo = static_cast<std::int64_t>(std::floor(src));
      t[i] = {lo, std::min(lo + 1, in - 1), src - static_cast<double>(lo)};
    }
    return t;
  };
  const auto ty = taps(ih, oh), tx = taps(iw, ow);
  auto out = Tensor<T>::zeros({n, c, oh, ow});
  auto dst = out.data();
  const auto src = x.data();
  for (std::int64_t p = 0; p < n * c; ++p) {
    const T* plane = src.data() + p * ih * iw;
    for (std::int64_t y = 0; y < oh; ++y) {
      const auto& a = ty[y];
      for (std::int64_t xx = 0; xx < ow; ++xx) {
        const auto& b = tx[xx];
        const double top = plane[a.lo * iw + b.lo] * (1 - b.frac) + plane[a.lo * iw + b.hi] * b.frac;
        const double bot = plane[a.hi * iw + b.lo] * (1 - b.frac) + plane[a.hi * iw + b.hi] * b.frac;
        dst[(p * oh + y) * ow + xx] = static_cast<T>(top * (1 - a.frac) + bot * a.frac);
      }
    }
  }
  return out;
}

#define RLNST_INSTANTIATE(T)                                                      \
  template Tensor<T> sum(const Tensor<T>&);                                       \
  template Tensor<T> mean(const Tensor<T>&);                                      \
  template Tensor<T> sum_per_item(const Tensor<T>&);                              \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                            \
  template Tensor<T> transpose(const Tensor<T>&);                                 \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);          \
  template Tensor<T> select_item(const Tensor<T>&, std::int64_t);                 \
  template Tensor<T> pad_reflect(const Tensor<T>&, std::int64_t, std::int64_t);   \
  template Tensor<T> crop(const Tensor<T>&, std::int64_t, std::int64_t);        \
  template Tensor<T> resize_bilinear(const Tensor<T>&, std::int64_t, std::int64_t);

RLNST_INSTANTIATE(float)
RLNST_INSTANTIATE(double)
#undef RLNST_INSTANTIATE

}  // namespace rlnst
