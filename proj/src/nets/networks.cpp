#include "rlnst/networks.hpp"

#include <cmath>
#include <numbers>

namespace rlnst {

namespace {
constexpr std::uint64_t kFeatureSeed = 0x5EEDF00DULL;
}

template <typename T>
Actor<T>::Actor(ParamRegistry<T>& reg, const ArchConfig& arch, Rng& rng) : arch_(arch) {
  conv1_ = Conv2d<T>::make(reg, "actor.conv1", 3, arch.width1, 9, 1, rng);
  norm1_ = InstanceNorm<T>::make(reg, "actor.norm1", arch.width1);
  conv2_ = Conv2d<T>::make(reg, "actor.conv2", arch.width1, arch.width2, 3, 2, rng);
  norm2_ = InstanceNorm<T>::make(reg, "actor.norm2", arch.width2);
  conv3_ = Conv2d<T>::make(reg, "actor.conv3", arch.width2, arch.width3, 3, 2, rng);
  norm3_ = InstanceNorm<T>::make(reg, "actor.norm3", arch.width3);
  residual_ = ResidualBlock<T>::make(reg, "actor.residual", arch.width3, rng);
  if (arch.step_gru) step_gru_ = ConvGRUCell<T>::make(reg, "actor.step_gru", arch.width3, arch.width3, rng);
  mu_head_ = Conv2d<T>::make(reg, "actor.mu", arch.width3, 1, 3, 1, rng, Init::he, 0.1);
  log_sigma_head_ = Conv2d<T>::make(reg, "actor.log_sigma", arch.width3, 1, 3, 1, rng, Init::he, 0.1);
}

template <typename T>
ActorOutput<T> Actor<T>::operator()(const Tensor<T>& state, const std::optional<Tensor<T>>& step_hidden) const {
  if (state.rank() != 4 || state.dim(1) != 3) {
    throw DimensionError("actor expects an (N,3,H,W) state, got " + to_string(state.shape()));
  }
  if (state.dim(2) % 4 != 0 || state.dim(3) % 4 != 0 || state.dim(2) < 8 || state.dim(3) < 8) {
    throw ShapeError("actor input " + to_string(state.shape()) +
                     " must have height and width divisible by 4 (and at least 8); pad the image first");
  }
  ActorOutput<T> out;
  out.skips[0] = relu(norm1_(conv1_(state)));
  out.skips[1] = relu(norm2_(conv2_(out.skips[0])));
  out.skips[2] = relu(norm3_(conv3_(out.skips[1])));
  auto latent = residual_(out.skips[2]);
  if (step_gru_) {
    latent = (*step_gru_)(latent, step_hidden);
    out.step_hidden = latent;
  }
  out.mu = mu_head_(latent);
  out.log_sigma = clamp(log_sigma_head_(latent), T(kLogSigmaMin), T(kLogSigmaMax));
  return out;
}

template <typename T>
Stylizer<T>::Stylizer(ParamRegistry<T>& reg, const ArchConfig& arch, Rng& rng) : arch_(arch) {
  merge_ = Conv2d<T>::make(reg, "stylizer.merge", arch.width3 + 1, arch.width3, 3, 1, rng);
  merge_norm_ = InstanceNorm<T>::make(reg, "stylizer.merge_norm", arch.width3);
  if (arch.frame_gru) frame_gru_ = ConvGRUCell<T>::make(reg, "stylizer.frame_gru", arch.width3, arch.width3, rng);
  up1_ = Conv2d<T>::make(reg, "stylizer.up1", arch.width3 + arch.width2, arch.width2, 3, 1, rng);
  up1_norm_ = InstanceNorm<T>::make(reg, "stylizer.up1_norm", arch.width2);
  up2_ = Conv2d<T>::make(reg, "stylizer.up2", arch.width2 + arch.width1, arch.width1, 3, 1, rng);
  up2_norm_ = InstanceNorm<T>::make(reg, "stylizer.up2_norm", arch.width1);
  out_ = Conv2d<T>::make(reg, "stylizer.out", arch.width1, 3, 9, 1, rng, Init::he, 0.5);
}

template <typename T>
StylizerOutput<T> Stylizer<T>::operator()(const Tensor<T>& action, const std::array<Tensor<T>, 3>& skips,
                                          const std::optional<Tensor<T>>& frame_hidden) const {
  const auto& deep = skips[2];
  if (action.rank() != 4 || action.dim(0) != deep.dim(0) || action.dim(2) != deep.dim(2) ||
      action.dim(3) != deep.dim(3)) {
    throw DimensionError("stylizer: action " + to_string(action.shape()) + " does not match deepest skip " +
                         to_string(deep.shape()));
  }
  StylizerOutput<T> out;
  auto x = relu(merge_norm_(merge_(concat<T>({action, deep}, 1))));
  if (frame_gru_) {
    x = (*frame_gru_)(x, frame_hidden);
    out.frame_hidden = x;
  }
  x = relu(up1_norm_(up1_(concat<T>({upsample_nearest(x, 2), skips[1]}, 1))));
  x = relu(up2_norm_(up2_(concat<T>({upsample_nearest(x, 2), skips[0]}, 1))));
  out.image = sigmoid(out_(x));
  return out;
}

template <typename T>
Critic<T>::Critic(ParamRegistry<T>& reg, const std::string& prefix, Rng& rng) {
  constexpr std::array<std::int64_t, 8> widths{3, 16, 16, 32, 32, 64, 64, 64};
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    const int stride = i % 2 == 1 ? 2 : 1;
    convs_[i] = Conv2d<T>::make(reg, prefix + ".conv" + std::to_string(i + 1), widths[i], widths[i + 1], 3, stride, rng);
  }
  const std::int64_t features = 64 * kStatePool * kStatePool + kActionPool * kActionPool;
  auto w = rng.normal_tensor<T>({features, 1}, std::sqrt(1.0 / static_cast<double>(features)));
  w.set_requires_grad(true);
  fc_weight_ = reg.add(prefix + ".fc.weight", w);
  fc_bias_ = reg.add(prefix + ".fc.bias", Tensor<T>::zeros({1, 1}, true));
}

template <typename T>
Tensor<T> Critic<T>::operator()(const Tensor<T>& state, const Tensor<T>& action) const {
  if (state.rank() != 4 || action.rank() != 4 || state.dim(0) != action.dim(0)) {
    throw DimensionError("critic: state " + to_string(state.shape()) + " and action " + to_string(action.shape()) +
                         " disagree on batch size");
  }
  const auto n = state.dim(0);
  auto x = state;
  for (const auto& conv : convs_) x = relu(conv(x));
  auto s_vec = reshape(avg_pool_to(x, kStatePool, kStatePool), {n, 64 * kStatePool * kStatePool});
  auto a_vec = reshape(avg_pool_to(action, kActionPool, kActionPool), {n, kActionPool * kActionPool * action.dim(1)});
  auto joint = concat<T>({s_vec, a_vec}, 1);
  return reshape(matmul(joint, fc_weight_) + fc_bias_, {n});
}

template <typename T>
FeatureNet<T>::FeatureNet(ParamRegistry<T>& reg, Rng& rng, double gain) {
  std::int64_t in = 3;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    convs_[i] = Conv2d<T>::make(reg, "featnet.conv" + std::to_string(i + 1), in, kWidths[i], 3, 1, rng,
                                Init::orthogonal, gain * std::numbers::sqrt2, false);
    in = kWidths[i];
  }
}

template <typename T>
std::array<Tensor<T>, FeatureNet<T>::kTaps> FeatureNet<T>::operator()(const Tensor<T>& image) const {
  if (image.rank() != 4 || image.dim(1) != 3) {
    throw DimensionError("feature net expects (N,3,H,W), got " + to_string(image.shape()));
  }
  if (image.dim(2) < 16 || image.dim(3) < 16) {
    throw ShapeError("feature net input " + to_string(image.shape()) + " is smaller than 16x16");
  }
  std::array<Tensor<T>, kTaps> taps;
  auto x = image;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    x = relu(convs_[i](x));
    if (i % 2 == 1) {
      taps[i / 2] = x;
      if (i < 7) x = avg_pool_to(x, x.dim(2) / 2, x.dim(3) / 2);
    }
  }
  return taps;
}

template <typename T>
Tensor<T> gaussian_log_prob(const Tensor<T>& a, const Tensor<T>& mu, const Tensor<T>& log_sigma) {
  const T half_log_2pi = static_cast<T>(0.5 * std::log(2.0 * std::numbers::pi));
  auto z = (a - mu) * exp(-log_sigma);
  auto per_element = (square(z) * T(-0.5) - log_sigma) - half_log_2pi;
  return sum_per_item(per_element);
}

template <typename T>
ActionSample<T> sample_action(const ActorOutput<T>& out, const Tensor<T>& eps) {
  if (eps.shape() != out.mu.shape()) {
    throw DimensionError("sample_action: noise " + to_string(eps.shape()) + " does not match " +
                         to_string(out.mu.shape()));
  }
  ActionSample<T> s;
  s.action = out.mu + exp(out.log_sigma) * eps;
  s.log_prob = gaussian_log_prob(s.action, out.mu, out.log_sigma);
  return s;
}

template <typename T>
ActionSample<T> sample_action(const ActorOutput<T>& out, Rng& rng) {
  return sample_action(out, rng.normal_tensor<T>(out.mu.shape()));
}

template <typename T>
Networks<T>::Networks(const ArchConfig& a, std::uint64_t seed, double alpha_init, double feature_gain) : arch(a) {
  Rng root(seed);
  Rng actor_rng = root.fork(1), stylizer_rng = root.fork(2), critic_rng = root.fork(3), target_rng = root.fork(4);
  Rng feature_rng(kFeatureSeed);
  actor = Actor<T>(params, arch, actor_rng);
  stylizer = Stylizer<T>(params, arch, stylizer_rng);
  critic = Critic<T>(params, "critic", critic_rng);
  target_critic = Critic<T>(params, "target_critic", target_rng);
  for (const auto& e : params.entries()) {
    if (e.owner != Owner::critic) continue;
    auto dst = params.at("target_critic" + e.name.substr(std::string("critic").size()));
    std::copy(e.tensor.data().begin(), e.tensor.data().end(), dst.data().begin());
  }
  log_alpha = params.add("alpha.log_alpha", Tensor<T>::full({1}, static_cast<T>(std::log(alpha_init)), true));
  features = FeatureNet<T>(params, feature_rng, feature_gain);
}

template <typename T>
T Networks<T>::alpha() const {
  return std::exp(log_alpha.data()[0]);
}

template <typename T>
ArchConfig infer_arch(const ParamRegistry<T>& reg) {
  ArchConfig arch;
  if (!reg.contains("actor.conv1.weight") || !reg.contains("actor.conv2.weight") || !reg.contains("actor.conv3.weight")) {
    throw CheckpointError(CheckpointError::Kind::missing_entry, "checkpoint lacks actor trunk weights");
  }
  arch.width1 = reg.at("actor.conv1.weight").dim(0);
  arch.width2 = reg.at("actor.conv2.weight").dim(0);
  arch.width3 = reg.at("actor.conv3.weight").dim(0);
  arch.step_gru = reg.contains("actor.step_gru.update.weight");
  arch.frame_gru = reg.contains("stylizer.frame_gru.update.weight");
  return arch;
}

#define RLNST_INSTANTIATE(T)                                                                     \
  template class Actor<T>;                                                                       \
  template class Stylizer<T>;                                                                    \
  template class Critic<T>;                                                                      \
  template class FeatureNet<T>;                                                                  \
  template struct Networks<T>;                                                                   \
  template Tensor<T> gaussian_log_prob(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);    \
  template ActionSample<T> sample_action(const ActorOutput<T>&, const Tensor<T>&);               \
  template ActionSample<T> sample_action(const ActorOutput<T>&, Rng&);                           \
  template ArchConfig infer_arch(const ParamRegistry<T>&);

RLNST_INSTANTIATE(float)
RLNST_INSTANTIATE(double)
#undef RLNST_INSTANTIATE

}  // namespace rlnst
