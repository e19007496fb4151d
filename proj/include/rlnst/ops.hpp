#pragma once

#include <vector>

#include "rlnst/tensor.hpp"

namespace rlnst {

enum class Elementwise { add, sub, mul, div, exp, log, relu, sigmoid, tanh, square, abs };

// Binary kinds accept `y` of identical shape, a single element, or a shape
// whose leading extents are 1 and whose trailing extents match `x`.
template <typename T>
Tensor<T> elementwise(Elementwise kind, const Tensor<T>& x, const Tensor<T>& y);
template <typename T>
Tensor<T> elementwise(Elementwise kind, const Tensor<T>& x, T y);
template <typename T>
Tensor<T> elementwise(Elementwise kind, const Tensor<T>& x);

template <typename T> Tensor<T> add(const Tensor<T>& x, const Tensor<T>& y) { return elementwise(Elementwise::add, x, y); }
template <typename T> Tensor<T> sub(const Tensor<T>& x, const Tensor<T>& y) { return elementwise(Elementwise::sub, x, y); }
template <typename T> Tensor<T> mul(const Tensor<T>& x, const Tensor<T>& y) { return elementwise(Elementwise::mul, x, y); }
template <typename T> Tensor<T> div(const Tensor<T>& x, const Tensor<T>& y) { return elementwise(Elementwise::div, x, y); }
template <typename T> Tensor<T> exp(const Tensor<T>& x) { return elementwise(Elementwise::exp, x); }
template <typename T> Tensor<T> log(const Tensor<T>& x) { return elementwise(Elementwise::log, x); }
template <typename T> Tensor<T> relu(const Tensor<T>& x) { return elementwise(Elementwise::relu, x); }
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x) { return elementwise(Elementwise::sigmoid, x); }
template <typename T> Tensor<T> tanh(const Tensor<T>& x) { return elementwise(Elementwise::tanh, x); }
template <typename T> Tensor<T> square(const Tensor<T>& x) { return elementwise(Elementwise::square, x); }
template <typename T> Tensor<T> abs(const Tensor<T>& x) { return elementwise(Elementwise::abs, x); }

template <typename T> Tensor<T> operator+(const Tensor<T>& x, const Tensor<T>& y) { return add(x, y); }
template <typename T> Tensor<T> operator-(const Tensor<T>& x, const Tensor<T>& y) { return sub(x, y); }
template <typename T> Tensor<T> operator*(const Tensor<T>& x, const Tensor<T>& y) { return mul(x, y); }
template <typename T> Tensor<T> operator/(const Tensor<T>& x, const Tensor<T>& y) { return div(x, y); }
template <typename T> Tensor<T> operator+(const Tensor<T>& x, T s) { return elementwise(Elementwise::add, x, s); }
template <typename T> Tensor<T> operator-(const Tensor<T>& x, T s) { return elementwise(Elementwise::sub, x, s); }
template <typename T> Tensor<T> operator*(const Tensor<T>& x, T s) { return elementwise(Elementwise::mul, x, s); }
template <typename T> Tensor<T> operator*(T s, const Tensor<T>& x) { return elementwise(Elementwise::mul, x, s); }
template <typename T> Tensor<T> operator/(const Tensor<T>& x, T s) { return elementwise(Elementwise::div, x, s); }
template <typename T> Tensor<T> operator-(const Tensor<T>& x) { return elementwise(Elementwise::mul, x, T(-1)); }
// s - x
template <typename T> Tensor<T> rsub(T s, const Tensor<T>& x);

// Clamps values into [lo, hi]; the gradient is zero where clamping was active.
template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi);

template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);
// Sums everything but the leading (batch) axis: (N, ...) -> (N).
template <typename T> Tensor<T> sum_per_item(const Tensor<T>& x);

template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T> Tensor<T> transpose(const Tensor<T>& x);  // 2-D only
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// Concatenates along `axis`; all other extents must agree.
template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);
// Picks batch item i of an (N, ...) tensor, keeping a leading extent of 1.
template <typename T>
Tensor<T> select_item(const Tensor<T>& x, std::int64_t i);

// 2-D convolution over NCHW input with OIKK weights. Borders are mirrored
// about the edge pixel (the edge itself is not repeated), pad = (K-1)/2, so
// the output is ceil(H/stride) x ceil(W/stride).
template <typename T>
Tensor<T> conv2d_reflect(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, int stride);

template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& x, int factor);

// Adaptive average pooling: output cell (i, j) averages input rows
// [floor(i*H/oh), ceil((i+1)*H/oh)) and the analogous column range.
template <typename T>
Tensor<T> avg_pool_to(const Tensor<T>& x, std::int64_t out_h, std::int64_t out_w);

// Per (n, c) normalization over H x W with biased variance, then affine.
template <typename T>
Tensor<T> instance_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                        T eps = T(1e-5));

// Per batch item: F F^T / (C H W) with F the C x HW reshaping. (N,C,H,W) -> (N,C,C).
template <typename T>
Tensor<T> gram(const Tensor<T>& feat);

// Backward bilinear warp: out(y, x) = in(y + flow_y, x + flow_x), sample
// coordinates clamped to the image. Differentiable in `x` only.
template <typename T>
Tensor<T> warp(const Tensor<T>& x, const Tensor<T>& flow);

// Mirror-pads spatial extents (not differentiable; used by image tooling).
template <typename T>
Tensor<T> pad_reflect(const Tensor<T>& x, std::int64_t bottom, std::int64_t right);
template <typename T>
Tensor<T> crop(const Tensor<T>& x, std::int64_t h, std::int64_t w);

// Bilinear resampling to (oh, ow) with half-pixel centers and clamped
// borders. Not differentiable.
template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& x, std::int64_t oh, std::int64_t ow);

namespace debug {
// Fault injection for the gradient-check harness: perturbs the conv2d input
// gradient so that oracle comparisons must fail.
void set_corrupt_conv_backward(bool on);
bool corrupt_conv_backward();
}  // namespace debug

}  // namespace rlnst
