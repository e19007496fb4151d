#pragma once

#include <vector>

#include "rlnst/losses.hpp"

namespace rlnst {

// Applies the actor/stylizer `steps` times with the mean action. The input
// (1,3,H,W) is mirror-padded to multiples of 4 and every output is cropped
// back to H x W. Returns the moving image after each step.
template <typename T>
std::vector<Tensor<T>> stylize_steps(const Networks<T>& nets, const Tensor<T>& image, int steps);

// Video inference: the step-wise hidden is threaded across steps of a frame
// and the frame-wise hidden of step t across frames. Result[f][t].
template <typename T>
std::vector<std::vector<Tensor<T>>> stylize_sequence(const Networks<T>& nets, const std::vector<Tensor<T>>& frames,
                                                     int steps);

template <typename T>
struct SyntheticClip {
  std::vector<Tensor<T>> frames;  // (1,3,H,W) each
  std::vector<Tensor<T>> flows;   // flows[t] maps frame t+1 onto frame t: frame_t = warp(frame_{t+1}, flows[t])
};

// Builds a clip backwards from `base` (the last frame) with synth_motion flows.
template <typename T>
SyntheticClip<T> make_synthetic_clip(const Tensor<T>& base, int frames, Rng& rng, const MotionParams& motion = {});

// Spearman rank correlation of two equally long sequences (average ranks for ties).
double rank_correlation(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace rlnst
