#include "rlnst/losses.hpp"

#include <cmath>

#include "../core/detail.hpp"
#include "rlnst/ops.hpp"

namespace rlnst {

void LossWeights::validate() const {
  if (!(lambda >= 0) || !(beta >= 0) || !(zeta >= 0)) {
    throw ArgumentError("loss weights must be non-negative (lambda=" + std::to_string(lambda) +
                        ", beta=" + std::to_string(beta) + ", zeta=" + std::to_string(zeta) + ")");
  }
}

template <typename T>
StyleTarget<T> StyleTarget<T>::build(const FeatureNet<T>& features, const Tensor<T>& style_image) {
  if (style_image.rank() != 4 || style_image.dim(0) != 1) {
    throw DimensionError("style image must be (1,3,H,W), got " + to_string(style_image.shape()));
  }
  NoGradGuard no_grad;
  StyleTarget t;
  t.image = style_image.detach();
  const auto taps = features(t.image);
  for (std::size_t j = 0; j < taps.size(); ++j) t.grams[j] = gram(taps[j]);
  return t;
}

template <typename T>
Tensor<T> content_loss(const FeatureTaps<T>& m_taps, const FeatureTaps<T>& c_taps) {
  const auto j = FeatureNet<T>::kContentTap;
  if (m_taps[j].shape() != c_taps[j].shape()) {
    throw DimensionError("content_loss: features " + to_string(m_taps[j].shape()) + " vs " +
                         to_string(c_taps[j].shape()));
  }
  return mean(square(m_taps[j] - c_taps[j]));
}

template <typename T>
Tensor<T> content_loss(const FeatureNet<T>& features, const Tensor<T>& m, const Tensor<T>& c) {
  if (m.shape() != c.shape()) {
    throw DimensionError("content_loss: image " + to_string(m.shape()) + " vs content " + to_string(c.shape()));
  }
  FeatureTaps<T> c_taps;
  {
    NoGradGuard no_grad;
    c_taps = features(c);
  }
  return content_loss(features(m), c_taps);
}

template <typename T>
Tensor<T> style_loss_per_item(const FeatureTaps<T>& m_taps, const StyleTarget<T>& target) {
  Tensor<T> total;
  for (std::size_t j = 0; j < m_taps.size(); ++j) {
    auto term = sum_per_item(square(gram(m_taps[j]) - target.grams[j]));
    total = total.defined() ? total + term : term;
  }
  return total;
}

template <typename T>
Tensor<T> style_loss(const FeatureTaps<T>& m_taps, const StyleTarget<T>& target) {
  return mean(style_loss_per_item(m_taps, target));
}

template <typename T>
Tensor<T> style_loss(const FeatureNet<T>& features, const Tensor<T>& m, const StyleTarget<T>& target) {
  return style_loss(features(m), target);
}

template <typename T>
Tensor<T> tv_loss(const Tensor<T>& m) {
  detail::require_rank(m, 4, "tv_loss");
  const auto planes = m.dim(0) * m.dim(1), h = m.dim(2), w = m.dim(3);
  if (h * w < 2) throw DegenerateStatisticsError("tv_loss: image " + to_string(m.shape()) + " has a single pixel");
  const double norm = static_cast<double>(m.numel());
  const auto x = m.data();
  double total = 0;
  for (std::int64_t p = 0; p < planes; ++p) {
    const T* a = x.data() + p * h * w;
    for (std::int64_t y = 0; y < h; ++y) {
      for (std::int64_t i = 0; i < w; ++i) {
        const double v = a[y * w + i];
        if (y + 1 < h) total += std::pow(a[(y + 1) * w + i] - v, 2);
        if (i + 1 < w) total += std::pow(a[y * w + i + 1] - v, 2);
      }
    }
  }
  return detail::make_result<T>(
      {}, {static_cast<T>(total / norm)}, {m},
      [m, planes, h, w, norm](const TensorImpl<T>& o) {
        auto* g = detail::grad_of(m);
        if (!g) return;
        const T scale = static_cast<T>(2.0 * o.grad[0] / norm);
        const auto x = m.data();
        for (std::int64_t p = 0; p < planes; ++p) {
          const T* a = x.data() + p * h * w;
          T* ga = g->data() + p * h * w;
          for (std::int64_t y = 0; y < h; ++y) {
            for (std::int64_t i = 0; i < w; ++i) {
              const auto k = y * w + i;
              if (y + 1 < h) {
                const T d = scale * (a[k + w] - a[k]);
                ga[k + w] += d;
                ga[k] -= d;
              }
              if (i + 1 < w) {
                const T d = scale * (a[k + 1] - a[k]);
                ga[k + 1] += d;
                ga[k] -= d;
              }
            }
          }
        }
      },
      "tv_loss");
}

template <typename T>
Tensor<T> gaussian_blur(const Tensor<T>& planes, int size) {
  detail::require_rank(planes, 3, "gaussian_blur");
  const auto p = planes.dim(0), h = planes.dim(1), w = planes.dim(2);
  const double sigma = size / 6.0;
  const int radius = size / 2;
  std::vector<double> kernel(2 * radius + 1);
  double ksum = 0;
  for (int i = -radius; i <= radius; ++i) ksum += kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& k : kernel) k /= ksum;

  std::vector<double> tmp(static_cast<std::size_t>(h * w));
  auto out = Tensor<T>::zeros({p, h, w});
  for (std::int64_t q = 0; q < p; ++q) {
    const T* src = planes.data().data() + q * h * w;
    T* dst = out.data().data() + q * h * w;
    for (std::int64_t y = 0; y < h; ++y) {
      for (std::int64_t x = 0; x < w; ++x) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i) {
          acc += kernel[i + radius] * src[y * w + std::clamp<std::int64_t>(x + i, 0, w - 1)];
        }
        tmp[y * w + x] = acc;
      }
    }
    for (std::int64_t y = 0; y < h; ++y) {
      for (std::int64_t x = 0; x < w; ++x) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i) {
          acc += kernel[i + radius] * tmp[std::clamp<std::int64_t>(y + i, 0, h - 1) * w + x];
        }
        dst[y * w + x] = static_cast<T>(acc);
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> assemble_motion(const Tensor<T>& coarse, std::int64_t h, std::int64_t w, double dx, double dy,
                          int blur_size) {
  detail::require_rank(coarse, 3, "assemble_motion");
  if (coarse.dim(0) != 2) throw DimensionError("assemble_motion: coarse grid must have 2 planes");
  auto full = resize_bilinear(reshape(coarse, {1, 2, coarse.dim(1), coarse.dim(2)}), h, w);
  auto flow = gaussian_blur(reshape(full, {2, h, w}), blur_size);
  auto d = flow.data();
  for (std::int64_t i = 0; i < h * w; ++i) {
    d[i] += static_cast<T>(dx);
    d[h * w + i] += static_cast<T>(dy);
  }
  return flow;
}

template <typename T>
Tensor<T> synth_motion(std::int64_t h, std::int64_t w, Rng& rng, const MotionParams& params) {
  if (h < 1 || w < 1) throw ArgumentError("synth_motion: size must be positive");
  const auto gh = std::max<std::int64_t>(1, std::llround(h / 100.0));
  const auto gw = std::max<std::int64_t>(1, std::llround(w / 100.0));
  auto coarse = rng.normal_tensor<T>({2, gh, gw}, params.wavy_std);
  const double dx = rng.uniform(-params.translation, params.translation);
  const double dy = rng.uniform(-params.translation, params.translation);
  return assemble_motion(coarse, h, w, dx, dy, params.blur_size);
}

template <typename T>
TemporalInputs<T> draw_temporal_inputs(const Shape& state_shape, Rng& rng, const MotionParams& params) {
  if (state_shape.size() != 4) throw DimensionError("draw_temporal_inputs: expected an (N,3,H,W) shape");
  const auto n = state_shape[0], h = state_shape[2], w = state_shape[3];
  TemporalInputs<T> in;
  in.flow = reshape(synth_motion<T>(h, w, rng, params), {1, 2, h, w});
  const double sigma = rng.uniform(0.001, 0.002);
  in.delta = rng.normal_tensor<T>(state_shape, sigma);
  in.eps = rng.normal_tensor<T>({n, 1, h / 4, w / 4});
  return in;
}

template <typename T>
Tensor<T> compound_temporal_loss(const Actor<T>& actor, const Stylizer<T>& stylizer, const Tensor<T>& s,
                                 const Tensor<T>& m, const TemporalInputs<T>& in) {
  if (s.shape() != m.shape() || in.delta.shape() != s.shape()) {
    throw DimensionError("compound_temporal_loss: state " + to_string(s.shape()) + ", moving image " +
                         to_string(m.shape()) + " and noise " + to_string(in.delta.shape()) + " must agree");
  }
  auto moved_state = warp(s, in.flow) + in.delta;
  auto out = actor(moved_state, in.step_hidden);
  auto stylized = stylizer(sample_action(out, in.eps).action, out.skips, in.frame_hidden).image;
  return mean(abs(stylized - warp(m, in.flow)));
}

template <typename T>
LossTerms<T> combined_loss(const FeatureNet<T>& features, const Tensor<T>& m, const Tensor<T>& c,
                           const StyleTarget<T>& target, const LossWeights& weights, LossMode mode,
                           const VideoLossArgs<T>* video) {
  weights.validate();
  if (mode == LossMode::image && video) {
    throw ArgumentError("combined_loss: temporal arguments given in image mode");
  }
  if (mode == LossMode::video && (!video || !video->actor || !video->stylizer || !video->state)) {
    throw ArgumentError("combined_loss: video mode needs the networks, state and temporal inputs");
  }
  if (m.shape() != c.shape()) {
    throw DimensionError("combined_loss: image " + to_string(m.shape()) + " vs content " + to_string(c.shape()));
  }
  FeatureTaps<T> c_taps;
  {
    NoGradGuard no_grad;
    c_taps = features(c);
  }
  const auto m_taps = features(m);
  LossTerms<T> t;
  t.content = content_loss(m_taps, c_taps);
  t.style = style_loss(m_taps, target);
  t.tv = tv_loss(m);
  t.total = t.content + t.style * static_cast<T>(weights.lambda) + t.tv * static_cast<T>(weights.beta);
  if (mode == LossMode::video) {
    t.temporal = compound_temporal_loss(*video->actor, *video->stylizer, *video->state, m, video->inputs);
    t.total = t.total + t.temporal * static_cast<T>(weights.zeta);
  }
  return t;
}

template <typename T>
double temporal_metric(const std::vector<Tensor<T>>& frames, const std::vector<Tensor<T>>& flows,
                       const std::vector<Tensor<T>>& masks) {
  if (frames.size() < 2) throw ArgumentError("temporal_metric: needs at least two frames");
  if (flows.size() != frames.size() - 1) {
    throw ArgumentError("temporal_metric: expected " + std::to_string(frames.size() - 1) + " flows, got " +
                        std::to_string(flows.size()));
  }
  if (!masks.empty() && masks.size() != flows.size()) {
    throw ArgumentError("temporal_metric: mask count must match flow count");
  }
  NoGradGuard no_grad;
  double total = 0;
  for (std::size_t t = 0; t + 1 < frames.size(); ++t) {
    const auto& cur = frames[t];
    auto warped = warp(frames[t + 1], flows[t]);
    if (warped.shape() != cur.shape()) throw DimensionError("temporal_metric: frame shapes differ");
    const auto a = cur.data(), b = warped.data();
    const auto hw = cur.dim(2) * cur.dim(3);
    double err = 0, weight = 0;
    for (std::int64_t i = 0; i < cur.numel(); ++i) {
      const double valid = masks.empty() ? 1.0 : static_cast<double>(masks[t].data()[i % hw]);
      err += valid * std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
      weight += valid;
    }
    total += weight > 0 ? err / weight : 0.0;
  }
  return 100.0 * total / static_cast<double>(frames.size() - 1);
}

#define RLNST_INSTANTIATE(T)                                                                                  \
  template struct StyleTarget<T>;                                                                             \
  template Tensor<T> content_loss(const FeatureTaps<T>&, const FeatureTaps<T>&);                              \
  template Tensor<T> content_loss(const FeatureNet<T>&, const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> style_loss_per_item(const FeatureTaps<T>&, const StyleTarget<T>&);                       \
  template Tensor<T> style_loss(const FeatureTaps<T>&, const StyleTarget<T>&);                                \
  template Tensor<T> style_loss(const FeatureNet<T>&, const Tensor<T>&, const StyleTarget<T>&);               \
  template Tensor<T> tv_loss(const Tensor<T>&);                                                               \
  template Tensor<T> gaussian_blur(const Tensor<T>&, int);                                                    \
  template Tensor<T> assemble_motion(const Tensor<T>&, std::int64_t, std::int64_t, double, double, int);      \
  template Tensor<T> synth_motion(std::int64_t, std::int64_t, Rng&, const MotionParams&);                     \
  template TemporalInputs<T> draw_temporal_inputs(const Shape&, Rng&, const MotionParams&);                   \
  template Tensor<T> compound_temporal_loss(const Actor<T>&, const Stylizer<T>&, const Tensor<T>&,            \
                                            const Tensor<T>&, const TemporalInputs<T>&);                      \
  template LossTerms<T> combined_loss(const FeatureNet<T>&, const Tensor<T>&, const Tensor<T>&,               \
                                      const StyleTarget<T>&, const LossWeights&, LossMode,                    \
                                      const VideoLossArgs<T>*);                                               \
  template double temporal_metric(const std::vector<Tensor<T>>&, const std::vector<Tensor<T>>&,               \
                                  const std::vector<Tensor<T>>&);

RLNST_INSTANTIATE(float)
RLNST_INSTANTIATE(double)
#undef RLNST_INSTANTIATE

}  // namespace rlnst
