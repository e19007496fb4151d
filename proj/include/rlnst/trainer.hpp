#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "rlnst/losses.hpp"
#include "rlnst/optim.hpp"
#include "rlnst/replay.hpp"

namespace rlnst {

enum class TrainMode { image, video };

struct TrainConfig {
  double gamma = 0.99;
  double tau = 0.005;
  double lr_style = 1e-4;
  double lr_critic = 3e-4;
  double lr_policy = 3e-4;
  double lr_alpha = 3e-4;
  double alpha_init = 0.2;
  std::optional<double> target_entropy;  // default -(action elements per item)
  int episode_length = 10;
  int batch_size = 4;
  long iterations = 2000;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::image;
  bool frame_gru = true;  // video mode: use the frame-wise GRU
  std::size_t replay_capacity = 10000;
  double reward_scale = 1e5;
  long checkpoint_every = 0;  // 0 writes only the final checkpoint
  OptimizerKind optimizer = OptimizerKind::adam;
  LossWeights weights;
  MotionParams motion;

  void validate() const;
  ArchConfig arch() const;
};

// r = -scale * style_loss per batch item.
template <typename T>
std::vector<double> compute_reward(const FeatureNet<T>& features, const Tensor<T>& s_next,
                                   const StyleTarget<T>& target, double scale);

// Runs episodes one environment step at a time. The frame-wise hidden of
// step t is carried to step t of the next episode within a clip.
template <typename T>
class EpisodeRunner {
 public:
  EpisodeRunner(const Networks<T>& nets, const StyleTarget<T>& target, const TrainConfig& cfg);

  void begin(const Tensor<T>& content, bool new_clip);
  bool active() const noexcept { return active_; }
  Transition<T> step(Rng& rng);

  // Test hook: the moving image is replaced by the state itself.
  bool identity_stylizer = false;

 private:
  const Networks<T>* nets_;
  const StyleTarget<T>* target_;
  TrainConfig cfg_;
  bool active_ = false;
  int t_ = 0;
  Tensor<T> content_, state_;
  std::optional<Tensor<T>> step_hidden_;
  std::vector<std::optional<Tensor<T>>> prev_frame_hidden_, frame_hidden_;
};

// T consecutive steps from the content image; transitions are also pushed
// to `pool` when given.
template <typename T>
std::vector<Transition<T>> rollout_episode(const Networks<T>& nets, const Tensor<T>& content,
                                           const StyleTarget<T>& target, const TrainConfig& cfg, Rng& rng,
                                           ReplayPool<T>* pool = nullptr, bool identity_stylizer = false);

// theta_bar <- tau * theta + (1 - tau) * theta_bar for every critic entry.
template <typename T>
void target_update(ParamRegistry<T>& params, double tau);

template <typename T>
struct PolicyStep {
  double loss = 0.0;
  std::vector<double> log_probs;
};

struct IterationMetrics {
  long iter = 0;
  double L = 0, Lco = 0, Lst = 0, Ltv = 0;
  std::optional<double> Lct;
  double Jq = 0, Jpi = 0, alpha = 0, reward_mean = 0;
};

// Owns the optimizers, replay pool and random streams of one training run.
template <typename T>
class Trainer {
 public:
  // Each clip is a sequence of (1,3,H,W) frames; image mode uses one-frame clips.
  Trainer(Networks<T>& nets, const TrainConfig& cfg, std::vector<std::vector<Tensor<T>>> clips,
          const Tensor<T>& style_image);

  // One environment step followed by one gradient step.
  IterationMetrics iterate();

  // Individual updates on an explicit batch.
  LossTerms<T> style_update(const std::vector<const Transition<T>*>& batch);
  double critic_update(const std::vector<const Transition<T>*>& batch);
  PolicyStep<T> policy_update(const std::vector<const Transition<T>*>& batch);
  void alpha_update(const std::vector<double>& log_probs);
  void target_update();

  // Bootstrapped critic targets y for a batch (no parameter change).
  std::vector<double> critic_targets(const std::vector<const Transition<T>*>& batch, Rng& rng) const;
  double target_entropy() const { return target_entropy_; }

  ReplayPool<T>& pool() { return pool_; }
  const StyleTarget<T>& style_target() const { return target_; }
  const TrainConfig& config() const { return cfg_; }
  long iteration() const { return iter_; }

 private:
  void next_episode();

  Networks<T>* nets_;
  TrainConfig cfg_;
  std::vector<std::vector<Tensor<T>>> clips_;
  StyleTarget<T> target_;
  ReplayPool<T> pool_;
  EpisodeRunner<T> runner_;
  Optimizer<T> style_opt_, critic_opt_, policy_opt_, alpha_opt_;
  Rng env_rng_, replay_rng_, style_rng_, critic_rng_, policy_rng_;
  double target_entropy_ = 0;
  long iter_ = 0;
  std::size_t clip_ = 0, frame_ = 0;
  bool started_ = false;
};

// Metrics CSV with header iter,L,Lco,Lst,Ltv,Lct,Jq,Jpi,alpha,reward_mean.
void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const IterationMetrics& m);

// Full run: iterates cfg.iterations times, writes metrics.csv and
// checkpoints into out_dir, and throws DivergenceError on a non-finite loss.
template <typename T>
void train(Networks<T>& nets, const TrainConfig& cfg, std::vector<std::vector<Tensor<T>>> clips,
           const Tensor<T>& style_image, const std::filesystem::path& out_dir,
           const std::function<void(const IterationMetrics&)>& on_iteration = {});

}  // namespace rlnst
