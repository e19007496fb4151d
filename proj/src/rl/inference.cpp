#include "rlnst/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rlnst/ops.hpp"

namespace rlnst {

namespace {

template <typename T>
Tensor<T> pad_to_multiple(const Tensor<T>& image) {
  if (image.rank() != 4 || image.dim(0) != 1 || image.dim(1) != 3) {
    throw DimensionError("expected a (1,3,H,W) image, got " + to_string(image.shape()));
  }
  const auto h = image.dim(2), w = image.dim(3);
  const auto ph = (4 - h % 4) % 4, pw = (4 - w % 4) % 4;
  if (h + ph < 8 || w + pw < 8 || ph >= h || pw >= w) {
    throw ShapeError("image " + to_string(image.shape()) + " is too small to stylize (minimum 8x8)");
  }
  return ph == 0 && pw == 0 ? image : pad_reflect(image, ph, pw);
}

template <typename T>
Tensor<T> crop_to(const Tensor<T>& image, std::int64_t h, std::int64_t w) {
  return image.dim(2) == h && image.dim(3) == w ? image : crop(image, h, w);
}

}  // namespace

template <typename T>
std::vector<Tensor<T>> stylize_steps(const Networks<T>& nets, const Tensor<T>& image, int steps) {
  return stylize_sequence(nets, {image}, steps)[0];
}

template <typename T>
std::vector<std::vector<Tensor<T>>> stylize_sequence(const Networks<T>& nets, const std::vector<Tensor<T>>& frames,
                                                     int steps) {
  if (steps < 1) throw ArgumentError("steps must be at least 1");
  NoGradGuard no_grad;
  std::vector<std::optional<Tensor<T>>> frame_hidden(static_cast<std::size_t>(steps));
  std::vector<std::vector<Tensor<T>>> out;
  for (const auto& frame : frames) {
    if (frame.shape() != frames[0].shape()) {
      throw DimensionError("frame " + to_string(frame.shape()) + " differs from " + to_string(frames[0].shape()));
    }
    const auto h = frame.dim(2), w = frame.dim(3);
    auto state = pad_to_multiple(frame);
    std::optional<Tensor<T>> step_hidden;
    std::vector<Tensor<T>> per_step;
    for (int t = 0; t < steps; ++t) {
      auto a = nets.actor(state, step_hidden);
      auto m = nets.stylizer(a.mu, a.skips, frame_hidden[t]);
      step_hidden = a.step_hidden;
      frame_hidden[t] = m.frame_hidden;
      state = m.image;
      per_step.push_back(crop_to(state, h, w));
    }
    out.push_back(std::move(per_step));
  }
  return out;
}

template <typename T>
SyntheticClip<T> make_synthetic_clip(const Tensor<T>& base, int frames, Rng& rng, const MotionParams& motion) {
  if (frames < 2) throw ArgumentError("a synthetic clip needs at least two frames");
  NoGradGuard no_grad;
  const auto h = base.dim(2), w = base.dim(3);
  SyntheticClip<T> clip;
  clip.frames.assign(static_cast<std::size_t>(frames), Tensor<T>());
  clip.flows.assign(static_cast<std::size_t>(frames - 1), Tensor<T>());
  clip.frames.back() = base.detach();
  for (int t = frames - 2; t >= 0; --t) {
    clip.flows[t] = reshape(synth_motion<T>(h, w, rng, motion), {1, 2, h, w});
    clip.frames[t] = warp(clip.frames[t + 1], clip.flows[t]);
  }
  return clip;
}

double rank_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw ArgumentError("rank_correlation: need two equal sequences of length >= 2");
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto i, auto j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n, mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  return va > 0 && vb > 0 ? cov / std::sqrt(va * vb) : 0.0;
}

#define RLNST_INSTANTIATE(T)                                                                                  \
  template std::vector<Tensor<T>> stylize_steps(const Networks<T>&, const Tensor<T>&, int);                   \
  template std::vector<std::vector<Tensor<T>>> stylize_sequence(const Networks<T>&,                           \
                                                                const std::vector<Tensor<T>>&, int);          \
  template SyntheticClip<T> make_synthetic_clip(const Tensor<T>&, int, Rng&, const MotionParams&);

RLNST_INSTANTIATE(float)
RLNST_INSTANTIATE(double)
#undef RLNST_INSTANTIATE

}  // namespace rlnst
