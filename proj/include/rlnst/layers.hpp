#pragma once

#include <optional>
#include <string>

#include "rlnst/ops.hpp"
#include "rlnst/params.hpp"
#include "rlnst/rng.hpp"

namespace rlnst {

enum class Init { he, orthogonal, zeros };

template <typename T>
struct Conv2d {
  Tensor<T> weight;  // (out, in, k, k)
  Tensor<T> bias;    // (out)
  int stride = 1;

  static Conv2d make(ParamRegistry<T>& reg, const std::string& name, std::int64_t in, std::int64_t out, int k,
                     int stride, Rng& rng, Init init = Init::he, double gain = 1.0, bool trainable = true);
  Tensor<T> operator()(const Tensor<T>& x) const { return conv2d_reflect(x, weight, bias, stride); }
  std::int64_t in_channels() const { return weight.dim(1); }
  std::int64_t out_channels() const { return weight.dim(0); }
};

template <typename T>
struct InstanceNorm {
  Tensor<T> gain;
  Tensor<T> bias;

  static InstanceNorm make(ParamRegistry<T>& reg, const std::string& name, std::int64_t channels);
  Tensor<T> operator()(const Tensor<T>& x) const { return instance_norm(x, gain, bias); }
};

// x + norm(conv(relu(norm(conv(x))))), 3x3 reflection-padded convolutions.
template <typename T>
struct ResidualBlock {
  Conv2d<T> conv1, conv2;
  InstanceNorm<T> norm1, norm2;

  static ResidualBlock make(ParamRegistry<T>& reg, const std::string& name, std::int64_t channels, Rng& rng);
  Tensor<T> operator()(const Tensor<T>& x) const;
};

// Convolutional GRU:
//   z = sigmoid(Wz * [x, h]), r = sigmoid(Wr * [x, h])
//   n = tanh(Wn * [x, r . h]),  h' = (1 - z) . h + z . n
template <typename T>
struct ConvGRUCell {
  Conv2d<T> update, reset, candidate;

  static ConvGRUCell make(ParamRegistry<T>& reg, const std::string& name, std::int64_t in, std::int64_t hidden,
                          Rng& rng);
  // An absent hidden state is treated as zeros.
  Tensor<T> operator()(const Tensor<T>& x, const std::optional<Tensor<T>>& h) const;
  std::int64_t hidden_channels() const { return update.out_channels(); }
};

template <typename T>
Tensor<T> residual_block(const ResidualBlock<T>& block, const Tensor<T>& x) {
  return block(x);
}

template <typename T>
Tensor<T> conv_gru_cell(const ConvGRUCell<T>& cell, const Tensor<T>& x, const std::optional<Tensor<T>>& h) {
  return cell(x, h);
}

}  // namespace rlnst
