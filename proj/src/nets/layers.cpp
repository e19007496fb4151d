#include "rlnst/layers.hpp"

#include <cmath>

#include <Eigen/QR>

namespace rlnst {

namespace {

// Rows (or columns, whichever are fewer) of the returned rows x cols matrix
// are orthonormal.
std::vector<double> orthogonal(std::int64_t rows, std::int64_t cols, Rng& rng) {
  const bool tall = rows > cols;
  const std::int64_t m = tall ? rows : cols, k = tall ? cols : rows;
  Eigen::MatrixXd a(m, k);
  for (std::int64_t j = 0; j < k; ++j) {
    for (std::int64_t i = 0; i < m; ++i) a(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m, k);
  const Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(k, k);
  for (std::int64_t j = 0; j < k; ++j) {
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  }
  std::vector<double> out(static_cast<std::size_t>(rows * cols));
  for (std::int64_t i = 0; i < rows; ++i) {
    for (std::int64_t j = 0; j < cols; ++j) out[i * cols + j] = tall ? q(i, j) : q(j, i);
  }
  return out;
}

}  // namespace

template <typename T>
Conv2d<T> Conv2d<T>::make(ParamRegistry<T>& reg, const std::string& name, std::int64_t in, std::int64_t out,
                          int k, int stride, Rng& rng, Init init, double gain, bool trainable) {
  const std::int64_t fan_in = in * k * k;
  auto w = Tensor<T>::zeros({out, in, k, k}, trainable);
  switch (init) {
    case Init::he: {
      const double std = gain * std::sqrt(2.0 / static_cast<double>(fan_in));
      for (auto& v : w.data()) v = static_cast<T>(std * rng.normal());
      break;
    }
    case Init::orthogonal: {
      const auto q = orthogonal(out, fan_in, rng);
      for (std::size_t i = 0; i < q.size(); ++i) w.data()[i] = static_cast<T>(gain * q[i]);
      break;
    }
    case Init::zeros:
      break;
  }
  Conv2d c;
  c.weight = reg.add(name + ".weight", w);
  c.bias = reg.add(name + ".bias", Tensor<T>::zeros({out}, trainable));
  c.stride = stride;
  return c;
}

template <typename T>
InstanceNorm<T> InstanceNorm<T>::make(ParamRegistry<T>& reg, const std::string& name, std::int64_t channels) {
  InstanceNorm n;
  n.gain = reg.add(name + ".gain", Tensor<T>::full({channels}, T(1), true));
  n.bias = reg.add(name + ".bias", Tensor<T>::zeros({channels}, true));
  return n;
}

template <typename T>
ResidualBlock<T> ResidualBlock<T>::make(ParamRegistry<T>& reg, const std::string& name, std::int64_t channels,
                                        Rng& rng) {
  ResidualBlock b;
  b.conv1 = Conv2d<T>::make(reg, name + ".conv1", channels, channels, 3, 1, rng);
  b.norm1 = InstanceNorm<T>::make(reg, name + ".norm1", channels);
  b.conv2 = Conv2d<T>::make(reg, name + ".conv2", channels, channels, 3, 1, rng);
  b.norm2 = InstanceNorm<T>::make(reg, name + ".norm2", channels);
  return b;
}

template <typename T>
Tensor<T> ResidualBlock<T>::operator()(const Tensor<T>& x) const {
  if (x.rank() != 4 || x.dim(1) != conv1.in_channels()) {
    throw DimensionError("residual block of width " + std::to_string(conv1.in_channels()) + " applied to " +
                         to_string(x.shape()));
  }
  auto y = relu(norm1(conv1(x)));
  return x + norm2(conv2(y));
}

template <typename T>
ConvGRUCell<T> ConvGRUCell<T>::make(ParamRegistry<T>& reg, const std::string& name, std::int64_t in,
                                    std::int64_t hidden, Rng& rng) {
  ConvGRUCell c;
  // Gate pre-activations stay near zero at init (sigmoid 0.5).
  c.update = Conv2d<T>::make(reg, name + ".update", in + hidden, hidden, 3, 1, rng, Init::he, 0.5);
  c.reset = Conv2d<T>::make(reg, name + ".reset", in + hidden, hidden, 3, 1, rng, Init::he, 0.5);
  c.candidate = Conv2d<T>::make(reg, name + ".candidate", in + hidden, hidden, 3, 1, rng, Init::he, 0.5);
  return c;
}

template <typename T>
Tensor<T> ConvGRUCell<T>::operator()(const Tensor<T>& x, const std::optional<Tensor<T>>& h_in) const {
  const auto hidden = hidden_channels();
  Tensor<T> h = h_in ? *h_in : Tensor<T>::zeros({x.dim(0), hidden, x.dim(2), x.dim(3)});
  if (h.rank() != 4 || h.dim(0) != x.dim(0) || h.dim(2) != x.dim(2) || h.dim(3) != x.dim(3) || h.dim(1) != hidden) {
    throw DimensionError("conv_gru_cell: hidden " + to_string(h.shape()) + " does not match input " +
                         to_string(x.shape()));
  }
  auto xh = concat<T>({x, h}, 1);
  auto z = sigmoid(update(xh));
  auto r = sigmoid(reset(xh));
  auto n = tanh(candidate(concat<T>({x, r * h}, 1)));
  return h + z * (n - h);
}

template struct Conv2d<float>;
template struct Conv2d<double>;
template struct InstanceNorm<float>;
template struct InstanceNorm<double>;
template struct ResidualBlock<float>;
template struct ResidualBlock<double>;
template struct ConvGRUCell<float>;
template struct ConvGRUCell<double>;

}  // namespace rlnst
