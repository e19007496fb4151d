#include <atomic>
#include <cmath>

#include <Eigen/Core>

#include "detail.hpp"
#include "rlnst/ops.hpp"

namespace rlnst {

using detail::grad_of;
using detail::make_result;

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace debug {
namespace {
std::atomic<bool> g_corrupt_conv{false};
}
void set_corrupt_conv_backward(bool on) { g_corrupt_conv = on; }
bool corrupt_conv_backward() { return g_corrupt_conv; }
}  // namespace debug

namespace {

// Mirror index about the edge pixel: -1 -> 1, n -> n-2.
inline std::int64_t reflect(std::int64_t i, std::int64_t n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * (n - 1) - i;
  return i;
}

struct ConvGeometry {
  std::int64_t n, c, h, w, o, k, stride, pad, oh, ow;
  std::vector<std::int64_t> row_map;  // [k * oh] source row per (kernel row, output row)
  std::vector<std::int64_t> col_map;  // [k * ow]

  std::int64_t col_rows() const { return c * k * k; }
  std::int64_t positions() const { return oh * ow; }
};

ConvGeometry make_geometry(const Shape& xs, const Shape& ws, int stride) {
  ConvGeometry g{};
  g.n = xs[0];
  g.c = xs[1];
  g.h = xs[2];
  g.w = xs[3];
  g.o = ws[0];
  g.k = ws[2];
  g.stride = stride;
  g.pad = (g.k - 1) / 2;
  g.oh = (g.h + stride - 1) / stride;
  g.ow = (g.w + stride - 1) / stride;
  g.row_map.resize(static_cast<std::size_t>(g.k * g.oh));
  g.col_map.resize(static_cast<std::size_t>(g.k * g.ow));
  for (std::int64_t ki = 0; ki < g.k; ++ki) {
    for (std::int64_t y = 0; y < g.oh; ++y) g.row_map[ki * g.oh + y] = reflect(y * stride - g.pad + ki, g.h);
    for (std::int64_t x = 0; x < g.ow; ++x) g.col_map[ki * g.ow + x] = reflect(x * stride - g.pad + ki, g.w);
  }
  return g;
}

template <typename T>
void im2col(const ConvGeometry& g, const T* img, T* col) {
  for (std::int64_t ch = 0; ch < g.c; ++ch) {
    const T* plane = img + ch * g.h * g.w;
    for (std::int64_t ki = 0; ki < g.k; ++ki) {
      for (std::int64_t kj = 0; kj < g.k; ++kj) {
        T* dst = col + ((ch * g.k + ki) * g.k + kj) * g.positions();
        const std::int64_t* cm = &g.col_map[kj * g.ow];
        for (std::int64_t y = 0; y < g.oh; ++y) {
          const T* src = plane + g.row_map[ki * g.oh + y] * g.w;
          for (std::int64_t x = 0; x < g.ow; ++x) *dst++ = src[cm[x]];
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const ConvGeometry& g, const T* col, T* img) {
  for (std::int64_t ch = 0; ch < g.c; ++ch) {
    T* plane = img + ch * g.h * g.w;
    for (std::int64_t ki = 0; ki < g.k; ++ki) {
      for (std::int64_t kj = 0; kj < g.k; ++kj) {
        const T* src = col + ((ch * g.k + ki) * g.k + kj) * g.positions();
        const std::int64_t* cm = &g.col_map[kj * g.ow];
        for (std::int64_t y = 0; y < g.oh; ++y) {
          T* dst = plane + g.row_map[ki * g.oh + y] * g.w;
          for (std::int64_t x = 0; x < g.ow; ++x) dst[cm[x]] += *src++;
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d_reflect(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, int stride) {
  detail::require_rank(x, 4, "conv2d_reflect input");
  detail::require_rank(w, 4, "conv2d_reflect weight");
  if (stride < 1) throw ArgumentError("conv2d_reflect: stride must be positive");
  if (w.dim(2) != w.dim(3) || w.dim(2) % 2 == 0) {
    throw UnsupportedKernelError("conv2d_reflect: kernel must be square with odd size, got " +
                                 to_string(w.shape()));
  }
  if (w.dim(1) != x.dim(1)) {
    throw DimensionError("conv2d_reflect: weight " + to_string(w.shape()) + " expects " +
                         std::to_string(w.dim(1)) + " input channels, input is " + to_string(x.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != w.dim(0))) {
    throw DimensionError("conv2d_reflect: bias " + to_string(bias.shape()) + " does not match weight " +
                         to_string(w.shape()));
  }
  const std::int64_t pad = (w.dim(2) - 1) / 2;
  if (x.dim(2) <= pad || x.dim(3) <= pad) {
    throw ShapeError("conv2d_reflect: input " + to_string(x.shape()) + " too small for reflection padding " +
                     std::to_string(pad));
  }

  auto geo = std::make_shared<ConvGeometry>(make_geometry(x.shape(), w.shape(), stride));
  const auto& g = *geo;
  const std::int64_t rows = g.col_rows(), pos = g.positions();
  Buffer<T> out(static_cast<std::size_t>(g.n * g.o * pos));
  Buffer<T> col(static_cast<std::size_t>(rows * pos));
  Eigen::Map<const RowMat<T>> wm(w.data().data(), g.o, rows);
  for (std::int64_t b = 0; b < g.n; ++b) {
    im2col(g, x.data().data() + b * g.c * g.h * g.w, col.data());
    Eigen::Map<RowMat<T>> om(out.data() + b * g.o * pos, g.o, pos);
    om.noalias() = wm * Eigen::Map<const RowMat<T>>(col.data(), rows, pos);
    if (bias.defined()) {
      for (std::int64_t oc = 0; oc < g.o; ++oc) om.row(oc).array() += bias.data()[oc];
    }
  }

  return make_result<T>(
      {g.n, g.o, g.oh, g.ow}, std::move(out), {x, w, bias},
      [x, w, bias, geo](const TensorImpl<T>& o) {
        const auto& g = *geo;
        const std::int64_t rows = g.col_rows(), pos = g.positions();
        auto* gx = grad_of(x);
        auto* gw = grad_of(w);
        auto* gb = grad_of(bias);
        Buffer<T> col(static_cast<std::size_t>(rows * pos));
        Eigen::Map<const RowMat<T>> wm(w.data().data(), g.o, rows);
        for (std::int64_t b = 0; b < g.n; ++b) {
          Eigen::Map<const RowMat<T>> gm(o.grad.data() + b * g.o * pos, g.o, pos);
          if (gb) {
            for (std::int64_t oc = 0; oc < g.o; ++oc) (*gb)[oc] += gm.row(oc).sum();
          }
          if (gw) {
            im2col(g, x.data().data() + b * g.c * g.h * g.w, col.data());
            Eigen::Map<RowMat<T>>(gw->data(), g.o, rows).noalias() +=
                gm * Eigen::Map<const RowMat<T>>(col.data(), rows, pos).transpose();
          }
          if (gx) {
            Eigen::Map<RowMat<T>> cm(col.data(), rows, pos);
            cm.noalias() = wm.transpose() * gm;
            if (debug::corrupt_conv_backward()) cm *= T(1.01);
            col2im_add(g, col.data(), gx->data() + b * g.c * g.h * g.w);
          }
        }
      },
      "conv2d_reflect");
}

template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& x, int factor) {
  detail::require_rank(x, 4, "upsample_nearest");
  if (factor < 1) throw ArgumentError("upsample_nearest: factor must be >= 1");
  const auto n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const auto oh = h * factor, ow = w * factor;
  Buffer<T> out(static_cast<std::size_t>(n * c * oh * ow));
  const auto src = x.data();
  for (std::int64_t p = 0; p < n * c; ++p) {
    for (std::int64_t y = 0; y < oh; ++y) {
      const T* srow = src.data() + (p * h + y / factor) * w;
      T* drow = out.data() + (p * oh + y) * ow;
      for (std::int64_t xx = 0; xx < ow; ++xx) drow[xx] = srow[xx / factor];
    }
  }
  return make_result<T>(
      {n, c, oh, ow}, std::move(out), {x},
      [x, factor, n, c, h, w, oh, ow](const TensorImpl<T>& o) {
        auto* gx = grad_of(x);
        if (!gx) return;
        for (std::int64_t p = 0; p < n * c; ++p) {
          for (std::int64_t y = 0; y < oh; ++y) {
            const T* grow = o.grad.data() + (p * oh + y) * ow;
            T* dst = gx->data() + (p * h + y / factor) * w;
            for (std::int64_t xx = 0; xx < ow; ++xx) dst[xx / factor] += grow[xx];
          }
        }
      },
      "upsample_nearest");
}

template <typename T>
Tensor<T> avg_pool_to(const Tensor<T>& x, std::int64_t out_h, std::int64_t out_w) {
  detail::require_rank(x, 4, "avg_pool_to");
  if (out_h <= 0 || out_w <= 0) throw ArgumentError("avg_pool_to: output extents must be positive");
  const auto n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  auto bounds = [](std::int64_t i, std::int64_t in, std::int64_t out) {
    return std::pair<std::int64_t, std::int64_t>{(i * in) / out, ((i + 1) * in + out - 1) / out};
  };
  Buffer<T> out(static_cast<std::size_t>(n * c * out_h * out_w));
  const auto src = x.data();
  for (std::int64_t p = 0; p < n * c; ++p) {
    for (std::int64_t i = 0; i < out_h; ++i) {
      const auto [y0, y1] = bounds(i, h, out_h);
      for (std::int64_t j = 0; j < out_w; ++j) {
        const auto [x0, x1] = bounds(j, w, out_w);
        T acc = T(0);
        for (std::int64_t y = y0; y < y1; ++y) {
          for (std::int64_t xx = x0; xx < x1; ++xx) acc += src[(p * h + y) * w + xx];
        }
        out[(p * out_h + i) * out_w + j] = acc / static_cast<T>((y1 - y0) * (x1 - x0));
      }
    }
  }
  return make_result<T>(
      {n, c, out_h, out_w}, std::move(out), {x},
      [x, n, c, h, w, out_h, out_w, bounds](const TensorImpl<T>& o) {
        auto* gx = grad_of(x);
        if (!gx) return;
        for (std::int64_t p = 0; p < n * c; ++p) {
          for (std::int64_t i = 0; i < out_h; ++i) {
            const auto [y0, y1] = bounds(i, h, out_h);
            for (std::int64_t j = 0; j < out_w; ++j) {
              const auto [x0, x1] = bounds(j, w, out_w);
              const T share = o.grad[(p * out_h + i) * out_w + j] / static_cast<T>((y1 - y0) * (x1 - x0));
              for (std::int64_t y = y0; y < y1; ++y) {
                for (std::int64_t xx = x0; xx < x1; ++xx) (*gx)[(p * h + y) * w + xx] += share;
              }
            }
          }
        }
      },
      "avg_pool_to");
}

template <typename T>
Tensor<T> instance_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  detail::require_rank(x, 4, "instance_norm");
  const auto n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (hw < 2) throw DegenerateStatisticsError("instance_norm: needs at least 2 spatial positions, got " + to_string(x.shape()));
  if (gain.numel() != c || bias.numel() != c) {
    throw DimensionError("instance_norm: affine parameters " + to_string(gain.shape()) + "/" +
                         to_string(bias.shape()) + " do not match " + std::to_string(c) + " channels");
  }
  // xhat and 1/sqrt(var+eps) are kept for the backward rule.
  auto xhat = std::make_shared<Buffer<T>>(x.data().size());
  auto inv_std = std::make_shared<Buffer<T>>(static_cast<std::size_t>(n * c));
  Buffer<T> out(x.data().size());
  const auto src = x.data();
  for (std::int64_t p = 0; p < n * c; ++p) {
    const T* v = src.data() + p * hw;
    T mu = T(0);
    for (std::int64_t i = 0; i < hw; ++i) mu += v[i];
    mu /= static_cast<T>(hw);
    T var = T(0);
    for (std::int64_t i = 0; i < hw; ++i) var += (v[i] - mu) * (v[i] - mu);
    var /= static_cast<T>(hw);
    const T is = T(1) / std::sqrt(var + eps);
    (*inv_std)[p] = is;
    const T ga = gain.data()[p % c], be = bias.data()[p % c];
    for (std::int64_t i = 0; i < hw; ++i) {
      const T xh = (v[i] - mu) * is;
      (*xhat)[p * hw + i] = xh;
      out[p * hw + i] = ga * xh + be;
    }
  }
  return make_result<T>(
      x.shape(), std::move(out), {x, gain, bias},
      [x, gain, bias, xhat, inv_std, n, c, hw](const TensorImpl<T>& o) {
        auto* gx = grad_of(x);
        auto* gg = grad_of(gain);
        auto* gb = grad_of(bias);
        for (std::int64_t p = 0; p < n * c; ++p) {
          const T* g = o.grad.data() + p * hw;
          const T* xh = xhat->data() + p * hw;
          T sum_g = T(0), sum_gx = T(0);
          for (std::int64_t i = 0; i < hw; ++i) {
            sum_g += g[i];
            sum_gx += g[i] * xh[i];
          }
          if (gg) (*gg)[p % c] += sum_gx;
          if (gb) (*gb)[p % c] += sum_g;
          if (gx) {
            const T ga = gain.data()[p % c];
            const T scale = ga * (*inv_std)[p];
            const T mean_g = sum_g / static_cast<T>(hw);
            const T mean_gx = sum_gx / static_cast<T>(hw);
            T* dst = gx->data() + p * hw;
            for (std::int64_t i = 0; i < hw; ++i) dst[i] += scale * (g[i] - mean_g - xh[i] * mean_gx);
          }
        }
      },
      "instance_norm");
}

template <typename T>
Tensor<T> gram(const Tensor<T>& feat) {
  detail::require_rank(feat, 4, "gram");
  const auto n = feat.dim(0), c = feat.dim(1), hw = feat.dim(2) * feat.dim(3);
  const T norm = static_cast<T>(c * hw);
  Buffer<T> out(static_cast<std::size_t>(n * c * c));
  for (std::int64_t b = 0; b < n; ++b) {
    Eigen::Map<const RowMat<T>> f(feat.data().data() + b * c * hw, c, hw);
    Eigen::Map<RowMat<T>> gm(out.data() + b * c * c, c, c);
    gm.noalias() = f * f.transpose();
    gm /= norm;
    // Force exact symmetry; the product kernel may round the two triangles differently.
    for (std::int64_t i = 0; i < c; ++i) {
      for (std::int64_t j = i + 1; j < c; ++j) gm(j, i) = gm(i, j);
    }
  }
  return make_result<T>(
      {n, c, c}, std::move(out), {feat},
      [feat, n, c, hw, norm](const TensorImpl<T>& o) {
        auto* gf = grad_of(feat);
        if (!gf) return;
        for (std::int64_t b = 0; b < n; ++b) {
          Eigen::Map<const RowMat<T>> f(feat.data().data() + b * c * hw, c, hw);
          Eigen::Map<const RowMat<T>> g(o.grad.data() + b * c * c, c, c);
          RowMat<T> sym = (g + g.transpose()) / norm;
          Eigen::Map<RowMat<T>>(gf->data() + b * c * hw, c, hw).noalias() += sym * f;
        }
      },
      "gram");
}

template <typename T>
Tensor<T> warp(const Tensor<T>& x, const Tensor<T>& flow) {
  detail::require_rank(x, 4, "warp input");
  detail::require_rank(flow, 4, "warp flow");
  const auto n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (flow.dim(1) != 2 || flow.dim(2) != h || flow.dim(3) != w || (flow.dim(0) != n && flow.dim(0) != 1)) {
    throw DimensionError("warp: flow " + to_string(flow.shape()) + " does not match image " + to_string(x.shape()));
  }
  // Per (batch, pixel): the four source taps and weights.
  struct Tap {
    std::int64_t y0, y1, x0, x1;
    T wy, wx;
  };
  auto taps = std::make_shared<std::vector<Tap>>(static_cast<std::size_t>(n * h * w));
  const auto fl = flow.data();
  for (std::int64_t b = 0; b < n; ++b) {
    const std::int64_t fb = flow.dim(0) == 1 ? 0 : b;
    for (std::int64_t y = 0; y < h; ++y) {
      for (std::int64_t xx = 0; xx < w; ++xx) {
        const T dx = fl[((fb * 2 + 0) * h + y) * w + xx];
        const T dy = fl[((fb * 2 + 1) * h + y) * w + xx];
        const T sy = std::clamp(static_cast<T>(y) + dy, T(0), static_cast<T>(h - 1));
        const T sx = std::clamp(static_cast<T>(xx) + dx, T(0), static_cast<T>(w - 1));
        Tap t;
        t.y0 = static_cast<std::int64_t>(std::floor(sy));
        t.x0 = static_cast<std::int64_t>(std::floor(sx));
        t.y1 = std::min(t.y0 + 1, h - 1);
        t.x1 = std::min(t.x0 + 1, w - 1);
        t.wy = sy - static_cast<T>(t.y0);
        t.wx = sx - static_cast<T>(t.x0);
        (*taps)[(b * h + y) * w + xx] = t;
      }
    }
  }
  Buffer<T> out(x.data().size());
  const auto src = x.data();
  for (std::int64_t b = 0; b < n; ++b) {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const T* plane = src.data() + (b * c + ch) * h * w;
      T* dst = out.data() + (b * c + ch) * h * w;
      for (std::int64_t i = 0; i < h * w; ++i) {
        const Tap& t = (*taps)[b * h * w + i];
        dst[i] = (T(1) - t.wy) * ((T(1) - t.wx) * plane[t.y0 * w + t.x0] + t.wx * plane[t.y0 * w + t.x1]) +
                 t.wy * ((T(1) - t.wx) * plane[t.y1 * w + t.x0] + t.wx * plane[t.y1 * w + t.x1]);
      }
    }
  }
  return make_result<T>(
      x.shape(), std::move(out), {x},
      [x, taps, n, c, h, w](const TensorImpl<T>& o) {
        auto* gx = grad_of(x);
        if (!gx) return;
        for (std::int64_t b = 0; b < n; ++b) {
          for (std::int64_t ch = 0; ch < c; ++ch) {
            T* plane = gx->data() + (b * c + ch) * h * w;
            const T* g = o.grad.data() + (b * c + ch) * h * w;
            for (std::int64_t i = 0; i < h * w; ++i) {
              const Tap& t = (*taps)[b * h * w + i];
              plane[t.y0 * w + t.x0] += g[i] * (T(1) - t.wy) * (T(1) - t.wx);
              plane[t.y0 * w + t.x1] += g[i] * (T(1) - t.wy) * t.wx;
              plane[t.y1 * w + t.x0] += g[i] * t.wy * (T(1) - t.wx);
              plane[t.y1 * w + t.x1] += g[i] * t.wy * t.wx;
            }
          }
        }
      },
      "warp");
}

#define RLNST_INSTANTIATE(T)                                                                  \
  template Tensor<T> conv2d_reflect(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int); \
  template Tensor<T> upsample_nearest(const Tensor<T>&, int);                                 \
  template Tensor<T> avg_pool_to(const Tensor<T>&, std::int64_t, std::int64_t);               \
  template Tensor<T> instance_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);  \
  template Tensor<T> gram(const Tensor<T>&);                                                  \
  template Tensor<T> warp(const Tensor<T>&, const Tensor<T>&);

RLNST_INSTANTIATE(float)
RLNST_INSTANTIATE(double)
#undef RLNST_INSTANTIATE

}  // namespace rlnst
