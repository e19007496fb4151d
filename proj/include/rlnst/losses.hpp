#pragma once

#include <array>
#include <optional>
#include <vector>

#include "rlnst/networks.hpp"

namespace rlnst {

struct LossWeights {
  double lambda = 1e5;  // style
  double beta = 1e-7;   // total variation
  double zeta = 1e2;    // compound temporal (video only)

  void validate() const;
};

template <typename T>
using FeatureTaps = std::array<Tensor<T>, FeatureNet<T>::kTaps>;

// Style image and its Gram matrices at every tap, computed once.
template <typename T>
struct StyleTarget {
  Tensor<T> image;  // (1, 3, H, W)
  std::array<Tensor<T>, FeatureNet<T>::kTaps> grams;  // (1, C_j, C_j)

  static StyleTarget build(const FeatureNet<T>& features, const Tensor<T>& style_image);
};

// (N,C,H,W) -> (N,C,C) normalized Gram matrices.
template <typename T>
Tensor<T> gram_matrix(const Tensor<T>& feat) {
  return gram(feat);
}

// Mean squared feature difference at the content tap.
template <typename T>
Tensor<T> content_loss(const FeatureTaps<T>& m_taps, const FeatureTaps<T>& c_taps);
template <typename T>
Tensor<T> content_loss(const FeatureNet<T>& features, const Tensor<T>& m, const Tensor<T>& c);

// Sum over taps of squared Frobenius Gram distance, one value per batch item.
template <typename T>
Tensor<T> style_loss_per_item(const FeatureTaps<T>& m_taps, const StyleTarget<T>& target);
// Batch mean of style_loss_per_item.
template <typename T>
Tensor<T> style_loss(const FeatureTaps<T>& m_taps, const StyleTarget<T>& target);
template <typename T>
Tensor<T> style_loss(const FeatureNet<T>& features, const Tensor<T>& m, const StyleTarget<T>& target);

// Squared anisotropic differences divided by N*C*H*W.
template <typename T>
Tensor<T> tv_loss(const Tensor<T>& m);

struct MotionParams {
  double wavy_std = 0.001;
  double translation = 10.0;  // uniform in [-translation, translation] per axis
  int blur_size = 100;        // Gaussian kernel extent; sigma = blur_size / 6
};

// Random flow field (2, h, w) in pixels: a coarse Gaussian grid resized to
// full resolution and blurred, plus a global translation.
template <typename T>
Tensor<T> synth_motion(std::int64_t h, std::int64_t w, Rng& rng, const MotionParams& params = {});

// Deterministic assembly used by synth_motion: coarse (2, gh, gw) wavy grid
// -> (2, h, w) after resize and blur, plus (dx, dy).
template <typename T>
Tensor<T> assemble_motion(const Tensor<T>& coarse, std::int64_t h, std::int64_t w, double dx, double dy,
                          int blur_size);

// Gaussian blur of each plane of a (P, h, w) tensor; replicate borders.
template <typename T>
Tensor<T> gaussian_blur(const Tensor<T>& planes, int size);

// Frozen stochastic inputs of one temporal-loss evaluation.
template <typename T>
struct TemporalInputs {
  Tensor<T> flow;   // (1 or N, 2, H, W)
  Tensor<T> delta;  // (N, 3, H, W) additive noise
  Tensor<T> eps;    // (N, 1, H/4, W/4) policy noise for the warped pass
  std::optional<Tensor<T>> step_hidden;
  std::optional<Tensor<T>> frame_hidden;
};

// Draws flow, noise level sigma ~ U(0.001, 0.002), delta and eps.
template <typename T>
TemporalInputs<T> draw_temporal_inputs(const Shape& state_shape, Rng& rng, const MotionParams& params = {});

// Mean |stylize(warp(s) + delta) - warp(m)|.
template <typename T>
Tensor<T> compound_temporal_loss(const Actor<T>& actor, const Stylizer<T>& stylizer, const Tensor<T>& s,
                                 const Tensor<T>& m, const TemporalInputs<T>& in);

enum class LossMode { image, video };

template <typename T>
struct LossTerms {
  Tensor<T> total;
  Tensor<T> content;
  Tensor<T> style;
  Tensor<T> tv;
  Tensor<T> temporal;  // undefined in image mode
};

template <typename T>
struct VideoLossArgs {
  const Actor<T>* actor = nullptr;
  const Stylizer<T>* stylizer = nullptr;
  const Tensor<T>* state = nullptr;
  TemporalInputs<T> inputs;
};

// content + lambda*style + beta*tv (+ zeta*temporal in video mode).
template <typename T>
LossTerms<T> combined_loss(const FeatureNet<T>& features, const Tensor<T>& m, const Tensor<T>& c,
                           const StyleTarget<T>& target, const LossWeights& weights, LossMode mode,
                           const VideoLossArgs<T>* video = nullptr);

// Mean over consecutive pairs of the masked mean |O_t - warp(O_{t+1}, flow_t)|,
// multiplied by 100. Masks may be empty (all valid).
template <typename T>
double temporal_metric(const std::vector<Tensor<T>>& frames, const std::vector<Tensor<T>>& flows,
                       const std::vector<Tensor<T>>& masks = {});

}  // namespace rlnst
