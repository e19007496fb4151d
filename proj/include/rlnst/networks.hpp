#pragma once

#include <array>
#include <optional>

#include "rlnst/layers.hpp"

namespace rlnst {

// Channel plan shared by the actor trunk and the stylizer decoder.
struct ArchConfig {
  std::int64_t width1 = 16;  // full resolution
  std::int64_t width2 = 32;  // 1/2 resolution
  std::int64_t width3 = 64;  // 1/4 resolution (latent)
  bool step_gru = false;     // ConvGRU in the actor, carried across steps
  bool frame_gru = false;    // ConvGRU in the stylizer, carried across frames

  bool video() const { return step_gru || frame_gru; }
  bool operator==(const ArchConfig&) const = default;
};

inline constexpr double kLogSigmaMin = -10.0;
inline constexpr double kLogSigmaMax = 2.0;

template <typename T>
struct ActorOutput {
  Tensor<T> mu;         // (N, 1, H/4, W/4)
  Tensor<T> log_sigma;  // same shape, clamped to [kLogSigmaMin, kLogSigmaMax]
  std::array<Tensor<T>, 3> skips;  // full, 1/2 and 1/4 resolution trunk activations
  std::optional<Tensor<T>> step_hidden;
};

template <typename T>
struct ActionSample {
  Tensor<T> action;    // mu + exp(log_sigma) * eps
  Tensor<T> log_prob;  // (N): diagonal-Gaussian log density summed per item
};

template <typename T>
class Actor {
 public:
  Actor() = default;
  Actor(ParamRegistry<T>& reg, const ArchConfig& arch, Rng& rng);

  ActorOutput<T> operator()(const Tensor<T>& state, const std::optional<Tensor<T>>& step_hidden = {}) const;

  // Raw (pre-clamp) head output; exposed for tests of the clamp.
  const Conv2d<T>& log_sigma_head() const { return log_sigma_head_; }

 private:
  ArchConfig arch_;
  Conv2d<T> conv1_, conv2_, conv3_;
  InstanceNorm<T> norm1_, norm2_, norm3_;
  ResidualBlock<T> residual_;
  std::optional<ConvGRUCell<T>> step_gru_;
  Conv2d<T> mu_head_, log_sigma_head_;
};

template <typename T>
struct StylizerOutput {
  Tensor<T> image;  // (N, 3, H, W) in [0, 1]
  std::optional<Tensor<T>> frame_hidden;
};

template <typename T>
class Stylizer {
 public:
  Stylizer() = default;
  Stylizer(ParamRegistry<T>& reg, const ArchConfig& arch, Rng& rng);

  StylizerOutput<T> operator()(const Tensor<T>& action, const std::array<Tensor<T>, 3>& skips,
                               const std::optional<Tensor<T>>& frame_hidden = {}) const;

 private:
  ArchConfig arch_;
  Conv2d<T> merge_, up1_, up2_, out_;
  InstanceNorm<T> merge_norm_, up1_norm_, up2_norm_;
  std::optional<ConvGRUCell<T>> frame_gru_;
};

// Soft Q network: seven reflection-padded conv+relu layers with strides
// 1,2,1,2,1,2,1, state features pooled to 4x4 and the action pooled to 8x8,
// concatenated and mapped to one value per batch item.
template <typename T>
class Critic {
 public:
  static constexpr std::int64_t kStatePool = 4;
  static constexpr std::int64_t kActionPool = 8;

  Critic() = default;
  Critic(ParamRegistry<T>& reg, const std::string& prefix, Rng& rng);

  Tensor<T> operator()(const Tensor<T>& state, const Tensor<T>& action) const;  // -> (N)

 private:
  std::array<Conv2d<T>, 7> convs_;
  Tensor<T> fc_weight_;  // (1088, 1)
  Tensor<T> fc_bias_;    // (1)
};

// Fixed perceptual feature extractor: eight 3x3 conv+relu layers, 2x2
// average pooling after layers 2, 4 and 6, taps after layers 2, 4, 6, 8.
template <typename T>
class FeatureNet {
 public:
  static constexpr std::array<std::int64_t, 8> kWidths{16, 16, 32, 32, 64, 64, 64, 64};
  static constexpr std::size_t kTaps = 4;
  static constexpr std::size_t kContentTap = 1;  // zero-based: the second tap

  FeatureNet() = default;
  FeatureNet(ParamRegistry<T>& reg, Rng& rng, double gain);

  std::array<Tensor<T>, kTaps> operator()(const Tensor<T>& image) const;

 private:
  std::array<Conv2d<T>, 8> convs_;
};

// Reparameterized sample with caller-supplied standard-normal noise.
template <typename T>
ActionSample<T> sample_action(const ActorOutput<T>& out, const Tensor<T>& eps);
template <typename T>
ActionSample<T> sample_action(const ActorOutput<T>& out, Rng& rng);

// Sum over each item of log N(a; mu, exp(log_sigma)^2).
template <typename T>
Tensor<T> gaussian_log_prob(const Tensor<T>& a, const Tensor<T>& mu, const Tensor<T>& log_sigma);

// Default feature-net weight gain. With the default style weight and reward
// scale it puts -reward near 10 for an unstyled image and near 1 once
// trained, keeping critic targets well conditioned in float32.
inline constexpr double kFeatureGain = 0.75;

// Everything that carries parameters: actor (phi), stylizer (psi),
// critic (theta), target critic (theta-bar), log(alpha) and the feature net.
template <typename T>
struct Networks {
  ArchConfig arch;
  ParamRegistry<T> params;
  Actor<T> actor;
  Stylizer<T> stylizer;
  Critic<T> critic;
  Critic<T> target_critic;
  FeatureNet<T> features;
  Tensor<T> log_alpha;

  Networks(const ArchConfig& arch, std::uint64_t seed, double alpha_init = 0.2,
           double feature_gain = kFeatureGain);
  Networks(const Networks&) = delete;
  Networks& operator=(const Networks&) = delete;
  Networks(Networks&&) = default;

  // Trainable parameter count of the inference path (actor + stylizer).
  std::int64_t inference_param_count() const { return params.count({Owner::actor, Owner::stylizer}); }
  T alpha() const;
};

// Architecture implied by the parameter names in a registry.
template <typename T>
ArchConfig infer_arch(const ParamRegistry<T>& reg);

}  // namespace rlnst
