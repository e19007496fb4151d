#include "rlnst/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "rlnst/autograd.hpp"
#include "rlnst/checkpoint.hpp"
#include "rlnst/ops.hpp"

namespace rlnst {

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ArgumentError("invalid training configuration: " + what);
  };
  require(gamma >= 0 && gamma <= 1, "gamma must lie in [0, 1]");
  require(tau >= 0 && tau <= 1, "tau must lie in [0, 1]");
  require(episode_length >= 1, "episode_length must be at least 1");
  require(batch_size >= 1, "batch_size must be at least 1");
  require(iterations >= 0, "iterations must be non-negative");
  require(replay_capacity >= 1, "replay_capacity must be positive");
  require(alpha_init > 0, "alpha_init must be positive");
  require(reward_scale > 0, "reward_scale must be positive");
  require(lr_style >= 0 && lr_critic >= 0 && lr_policy >= 0 && lr_alpha >= 0, "learning rates must be non-negative");
  require(checkpoint_every >= 0, "checkpoint_every must be non-negative");
  weights.validate();
}

ArchConfig TrainConfig::arch() const {
  ArchConfig a;
  if (mode == TrainMode::video) {
    a.step_gru = true;
    a.frame_gru = frame_gru;
  }
  return a;
}

template <typename T>
std::vector<double> compute_reward(const FeatureNet<T>& features, const Tensor<T>& s_next,
                                   const StyleTarget<T>& target, double scale) {
  NoGradGuard no_grad;
  const auto per_item = style_loss_per_item(features(s_next), target);
  std::vector<double> r;
  for (T v : per_item.data()) r.push_back(-scale * static_cast<double>(v));
  return r;
}

namespace {

template <typename T>
Tensor<T> stack(const std::vector<const Transition<T>*>& batch, Tensor<T> Transition<T>::*field) {
  std::vector<Tensor<T>> parts;
  for (const auto* t : batch) parts.push_back(t->*field);
  return parts.size() == 1 ? parts[0] : concat(parts, 0);
}

template <typename T>
std::optional<Tensor<T>> stack(const std::vector<const Transition<T>*>& batch,
                               std::optional<Tensor<T>> Transition<T>::*field) {
  std::vector<Tensor<T>> parts;
  for (const auto* t : batch) {
    if (!(t->*field)) return std::nullopt;
    parts.push_back(*(t->*field));
  }
  return parts.size() == 1 ? parts[0] : concat(parts, 0);
}

template <typename T>
void require_batch(const std::vector<const Transition<T>*>& batch, const char* who) {
  if (batch.empty()) throw ArgumentError(std::string(who) + ": empty batch");
}

// Temporarily excludes a parameter group from differentiation.
template <typename T>
class FreezeGuard {
 public:
  explicit FreezeGuard(std::vector<Tensor<T>> params) : params_(std::move(params)) {
    for (auto& p : params_) p.set_requires_grad(false);
  }
  ~FreezeGuard() {
    for (auto& p : params_) p.set_requires_grad(true);
  }
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  std::vector<Tensor<T>> params_;
};

template <typename T>
std::vector<Tensor<T>> concat_groups(const ParamRegistry<T>& reg, std::initializer_list<Owner> owners) {
  std::vector<Tensor<T>> out;
  for (auto owner : owners) {
    auto g = reg.group(owner);
    out.insert(out.end(), g.begin(), g.end());
  }
  return out;
}

}  // namespace

template <typename T>
EpisodeRunner<T>::EpisodeRunner(const Networks<T>& nets, const StyleTarget<T>& target, const TrainConfig& cfg)
    : nets_(&nets), target_(&target), cfg_(cfg) {}

template <typename T>
void EpisodeRunner<T>::begin(const Tensor<T>& content, bool new_clip) {
  const auto steps = static_cast<std::size_t>(cfg_.episode_length);
  if (new_clip || prev_frame_hidden_.size() != steps) prev_frame_hidden_.assign(steps, std::nullopt);
  frame_hidden_.assign(steps, std::nullopt);
  content_ = content;
  state_ = content;
  step_hidden_.reset();
  t_ = 0;
  active_ = true;
}

template <typename T>
Transition<T> EpisodeRunner<T>::step(Rng& rng) {
  if (!active_) throw ContractError("EpisodeRunner::step called without an active episode");
  NoGradGuard no_grad;
  const auto& arch = nets_->arch;
  const auto n = state_.dim(0), h = state_.dim(2), w = state_.dim(3);
  auto zeros_hidden = [&] { return Tensor<T>::zeros({n, arch.width3, h / 4, w / 4}); };

  Transition<T> tr;
  tr.s = state_;
  tr.content = content_;
  tr.step = t_ + 1;
  if (arch.step_gru) tr.step_hidden = step_hidden_ ? *step_hidden_ : zeros_hidden();
  if (arch.frame_gru) tr.frame_hidden = prev_frame_hidden_[t_] ? *prev_frame_hidden_[t_] : zeros_hidden();

  auto out = nets_->actor(state_, tr.step_hidden);
  tr.a = sample_action(out, rng.normal_tensor<T>(out.mu.shape())).action;
  if (identity_stylizer) {
    tr.s_next = state_.clone();
  } else {
    auto m = nets_->stylizer(tr.a, out.skips, tr.frame_hidden);
    tr.s_next = m.image;
    frame_hidden_[t_] = m.frame_hidden;
  }
  tr.next_step_hidden = out.step_hidden;
  tr.r = compute_reward(nets_->features, tr.s_next, *target_, cfg_.reward_scale)[0];

  step_hidden_ = out.step_hidden;
  state_ = tr.s_next;
  ++t_;
  tr.done = t_ == cfg_.episode_length;
  if (tr.done) {
    active_ = false;
    prev_frame_hidden_ = frame_hidden_;
  }
  return tr;
}

template <typename T>
std::vector<Transition<T>> rollout_episode(const Networks<T>& nets, const Tensor<T>& content,
                                           const StyleTarget<T>& target, const TrainConfig& cfg, Rng& rng,
                                           ReplayPool<T>* pool, bool identity_stylizer) {
  EpisodeRunner<T> runner(nets, target, cfg);
  runner.identity_stylizer = identity_stylizer;
  runner.begin(content, true);
  std::vector<Transition<T>> out;
  while (runner.active()) {
    out.push_back(runner.step(rng));
    if (pool) pool->push(out.back());
  }
  return out;
}

template <typename T>
void target_update(ParamRegistry<T>& params, double tau) {
  const std::string src_prefix = "critic.", dst_prefix = "target_critic.";
  for (const auto& e : params.entries()) {
    if (e.owner != Owner::critic) continue;
    const auto dst_name = dst_prefix + e.name.substr(src_prefix.size());
    if (!params.contains(dst_name) || params.at(dst_name).shape() != e.tensor.shape()) {
      throw DimensionError("target_update: no target parameter matching '" + e.name + "'");
    }
    auto dst = params.at(dst_name).data();
    const auto src = e.tensor.data();
    for (std::size_t i = 0; i < src.size(); ++i) {
      dst[i] = static_cast<T>(tau * static_cast<double>(src[i]) + (1.0 - tau) * static_cast<double>(dst[i]));
    }
  }
}

template <typename T>
Trainer<T>::Trainer(Networks<T>& nets, const TrainConfig& cfg, std::vector<std::vector<Tensor<T>>> clips,
                    const Tensor<T>& style_image)
    : nets_(&nets),
      cfg_(cfg),
      clips_(std::move(clips)),
      target_(StyleTarget<T>::build(nets.features, style_image)),
      pool_(cfg.replay_capacity),
      runner_(nets, target_, cfg) {
  cfg_.validate();
  if (clips_.empty()) throw ArgumentError("training data is empty");
  for (const auto& clip : clips_) {
    if (clip.empty()) throw ArgumentError("training clip without frames");
  }
  const auto& first = clips_[0][0];
  if (cfg_.mode == TrainMode::video && !(nets.arch.step_gru)) {
    throw ArgumentError("video training needs networks built with the step-wise GRU");
  }
  const auto& p = nets.params;
  const auto kind = cfg_.optimizer;
  style_opt_ = Optimizer<T>(concat_groups(p, {Owner::actor, Owner::stylizer}), cfg_.lr_style, kind);
  critic_opt_ = Optimizer<T>(p.group(Owner::critic), cfg_.lr_critic, kind);
  policy_opt_ = Optimizer<T>(p.group(Owner::actor), cfg_.lr_policy, kind);
  alpha_opt_ = Optimizer<T>({nets.log_alpha}, cfg_.lr_alpha, kind);

  Rng root(cfg_.seed);
  env_rng_ = root.fork(11);
  replay_rng_ = root.fork(12);
  style_rng_ = root.fork(13);
  critic_rng_ = root.fork(14);
  policy_rng_ = root.fork(15);
  target_entropy_ = cfg_.target_entropy ? *cfg_.target_entropy
                                        : -static_cast<double>((first.dim(2) / 4) * (first.dim(3) / 4));
}

template <typename T>
void Trainer<T>::next_episode() {
  bool new_clip = true;
  if (cfg_.mode == TrainMode::image) {
    clip_ = static_cast<std::size_t>(env_rng_.below(clips_.size()));
    frame_ = 0;
  } else if (started_) {
    ++frame_;
    if (frame_ < clips_[clip_].size()) {
      new_clip = false;
    } else {
      frame_ = 0;
      clip_ = (clip_ + 1) % clips_.size();
    }
  }
  started_ = true;
  runner_.begin(clips_[clip_][frame_], new_clip);
}

template <typename T>
LossTerms<T> Trainer<T>::style_update(const std::vector<const Transition<T>*>& batch) {
  require_batch(batch, "style_update");
  auto& nets = *nets_;
  nets.params.zero_grad();
  const auto s = stack(batch, &Transition<T>::s);
  const auto c = stack(batch, &Transition<T>::content);
  const auto step_h = stack(batch, &Transition<T>::step_hidden);
  const auto frame_h = stack(batch, &Transition<T>::frame_hidden);

  auto out = nets.actor(s, step_h);
  auto eps = style_rng_.normal_tensor<T>(out.mu.shape());
  auto m = nets.stylizer(sample_action(out, eps).action, out.skips, frame_h);

  LossTerms<T> terms;
  if (cfg_.mode == TrainMode::video) {
    VideoLossArgs<T> video;
    video.actor = &nets.actor;
    video.stylizer = &nets.stylizer;
    video.state = &s;
    video.inputs = draw_temporal_inputs<T>(s.shape(), style_rng_, cfg_.motion);
    video.inputs.eps = eps;
    video.inputs.step_hidden = step_h;
    video.inputs.frame_hidden = frame_h;
    terms = combined_loss(nets.features, m.image, c, target_, cfg_.weights, LossMode::video, &video);
  } else {
    terms = combined_loss(nets.features, m.image, c, target_, cfg_.weights, LossMode::image);
  }
  if (!std::isfinite(static_cast<double>(terms.total.item()))) return terms;
  backward(terms.total);
  style_opt_.step();
  return terms;
}

template <typename T>
std::vector<double> Trainer<T>::critic_targets(const std::vector<const Transition<T>*>& batch, Rng& rng) const {
  require_batch(batch, "critic_targets");
  NoGradGuard no_grad;
  const auto& nets = *nets_;
  const auto s_next = stack(batch, &Transition<T>::s_next);
  auto out = nets.actor(s_next, stack(batch, &Transition<T>::next_step_hidden));
  auto next = sample_action(out, rng);
  auto q_next = nets.target_critic(s_next, next.action);
  const double alpha = static_cast<double>(nets.alpha());
  std::vector<double> y;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    // Truncation at the episode end is not terminal: the bootstrap term stays.
    const double soft_value = static_cast<double>(q_next.data()[i]) - alpha * static_cast<double>(next.log_prob.data()[i]);
    y.push_back(batch[i]->r + cfg_.gamma * soft_value);
  }
  return y;
}

template <typename T>
double Trainer<T>::critic_update(const std::vector<const Transition<T>*>& batch) {
  require_batch(batch, "critic_update");
  auto& nets = *nets_;
  const auto y = critic_targets(batch, critic_rng_);
  nets.params.zero_grad();
  std::vector<T> yv(y.begin(), y.end());
  auto target = Tensor<T>::from({static_cast<std::int64_t>(batch.size())}, std::move(yv));
  auto q = nets.critic(stack(batch, &Transition<T>::s), stack(batch, &Transition<T>::a));
  auto loss = mean(square(q - target)) * T(0.5);
  const double value = static_cast<double>(loss.item());
  if (!std::isfinite(value)) return value;
  backward(loss);
  critic_opt_.step();
  return value;
}

template <typename T>
PolicyStep<T> Trainer<T>::policy_update(const std::vector<const Transition<T>*>& batch) {
  require_batch(batch, "policy_update");
  auto& nets = *nets_;
  nets.params.zero_grad();
  FreezeGuard<T> frozen(nets.params.group(Owner::critic));
  const auto s = stack(batch, &Transition<T>::s);
  auto out = nets.actor(s, stack(batch, &Transition<T>::step_hidden));
  auto sample = sample_action(out, policy_rng_);
  auto q = nets.critic(s, sample.action);
  auto loss = mean(sample.log_prob * nets.alpha() - q);
  PolicyStep<T> result;
  result.loss = static_cast<double>(loss.item());
  for (T v : sample.log_prob.data()) result.log_probs.push_back(static_cast<double>(v));
  if (!std::isfinite(result.loss)) return result;
  backward(loss);
  policy_opt_.step();
  return result;
}

template <typename T>
void Trainer<T>::alpha_update(const std::vector<double>& log_probs) {
  if (log_probs.empty()) throw ArgumentError("alpha_update: no log-probabilities");
  auto& log_alpha = nets_->log_alpha;
  log_alpha.zero_grad();
  const double gap = std::accumulate(log_probs.begin(), log_probs.end(), 0.0) / static_cast<double>(log_probs.size()) +
                     target_entropy_;
  auto loss = sum(exp(log_alpha) * static_cast<T>(-gap));
  backward(loss);
  alpha_opt_.step();
}

template <typename T>
void Trainer<T>::target_update() {
  rlnst::target_update(nets_->params, cfg_.tau);
}

template <typename T>
IterationMetrics Trainer<T>::iterate() {
  ++iter_;
  if (!runner_.active()) next_episode();
  pool_.push(runner_.step(env_rng_));

  const auto batch = pool_.sample(static_cast<std::size_t>(cfg_.batch_size), replay_rng_);
  IterationMetrics m;
  m.iter = iter_;
  const auto terms = style_update(batch);
  m.L = static_cast<double>(terms.total.item());
  m.Lco = static_cast<double>(terms.content.item());
  m.Lst = static_cast<double>(terms.style.item());
  m.Ltv = static_cast<double>(terms.tv.item());
  if (terms.temporal.defined()) m.Lct = static_cast<double>(terms.temporal.item());
  m.Jq = critic_update(batch);
  const auto policy = policy_update(batch);
  m.Jpi = policy.loss;
  alpha_update(policy.log_probs);
  target_update();
  m.alpha = static_cast<double>(nets_->alpha());
  double r = 0;
  for (const auto* t : batch) r += t->r;
  m.reward_mean = r / static_cast<double>(batch.size());
  return m;
}

void write_metrics_header(std::ostream& out) {
  out << "iter,L,Lco,Lst,Ltv,Lct,Jq,Jpi,alpha,reward_mean\n";
}

void write_metrics_row(std::ostream& out, const IterationMetrics& m) {
  char buf[512];
  auto g = [](double v) {
    char b[32];
    std::snprintf(b, sizeof(b), "%.9g", v);
    return std::string(b);
  };
  std::snprintf(buf, sizeof(buf), "%ld,%s,%s,%s,%s,%s,%s,%s,%s,%s\n", m.iter, g(m.L).c_str(), g(m.Lco).c_str(),
                g(m.Lst).c_str(), g(m.Ltv).c_str(), m.Lct ? g(*m.Lct).c_str() : "", g(m.Jq).c_str(),
                g(m.Jpi).c_str(), g(m.alpha).c_str(), g(m.reward_mean).c_str());
  out << buf;
}

template <typename T>
void train(Networks<T>& nets, const TrainConfig& cfg, std::vector<std::vector<Tensor<T>>> clips,
           const Tensor<T>& style_image, const std::filesystem::path& out_dir,
           const std::function<void(const IterationMetrics&)>& on_iteration) {
  Trainer<T> trainer(nets, cfg, std::move(clips), style_image);
  std::filesystem::create_directories(out_dir);
  std::ofstream csv(out_dir / "metrics.csv", std::ios::trunc);
  if (!csv) throw ArgumentError("cannot write " + (out_dir / "metrics.csv").string());
  write_metrics_header(csv);
  for (long i = 0; i < cfg.iterations; ++i) {
    const auto m = trainer.iterate();
    write_metrics_row(csv, m);
    csv.flush();
    if (on_iteration) on_iteration(m);
    for (double v : {m.L, m.Jq, m.Jpi, m.alpha, m.reward_mean}) {
      if (!std::isfinite(v)) {
        throw DivergenceError(m.iter, "training diverged at iteration " + std::to_string(m.iter) +
                                          " (non-finite loss)");
      }
    }
    if (cfg.checkpoint_every > 0 && m.iter % cfg.checkpoint_every == 0 && m.iter != cfg.iterations) {
      char name[64];
      std::snprintf(name, sizeof(name), "checkpoint_%06ld.rlnst", m.iter);
      save_checkpoint(nets.params, out_dir / name);
    }
  }
  save_checkpoint(nets.params, out_dir / "final.rlnst");
}

#define RLNST_INSTANTIATE(T)                                                                                     \
  template std::vector<double> compute_reward(const FeatureNet<T>&, const Tensor<T>&, const StyleTarget<T>&,     \
                                              double);                                                           \
  template class EpisodeRunner<T>;                                                                               \
  template std::vector<Transition<T>> rollout_episode(const Networks<T>&, const Tensor<T>&,                     \
                                                      const StyleTarget<T>&, const TrainConfig&, Rng&,           \
                                                      ReplayPool<T>*, bool);                                     \
  template void target_update(ParamRegistry<T>&, double);                                                        \
  template class Trainer<T>;                                                                                     \
  template void train(Networks<T>&, const TrainConfig&, std::vector<std::vector<Tensor<T>>>, const Tensor<T>&, \
                      const std::filesystem::path&, const std::function<void(const IterationMetrics&)>&);

RLNST_INSTANTIATE(float)
RLNST_INSTANTIATE(double)
#undef RLNST_INSTANTIATE

}  // namespace rlnst
