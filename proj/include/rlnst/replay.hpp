#pragma once

#include <optional>
#include <vector>

#include "rlnst/rng.hpp"
#include "rlnst/tensor.hpp"

namespace rlnst {

template <typename T>
struct Transition {
  Tensor<T> s;        // (1, 3, H, W)
  Tensor<T> a;        // (1, 1, H/4, W/4)
  double r = 0.0;
  Tensor<T> s_next;   // shares storage with the next transition's s
  bool done = false;  // last step of an episode
  int step = 0;       // 1-based step index within the episode
  Tensor<T> content;  // the episode's content image (or frame)
  // Video mode: hidden states fed to the networks at s, and the actor's
  // hidden after the step (its input at s_next).
  std::optional<Tensor<T>> step_hidden;
  std::optional<Tensor<T>> next_step_hidden;
  std::optional<Tensor<T>> frame_hidden;
};

// Fixed-capacity FIFO ring; the oldest transition is evicted first.
template <typename T>
class ReplayPool {
 public:
  explicit ReplayPool(std::size_t capacity = 10000);

  void push(Transition<T> t);
  std::size_t size() const noexcept { return items_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  bool empty() const noexcept { return items_.empty(); }

  // i = 0 is the oldest retained transition.
  const Transition<T>& at(std::size_t i) const;

  // Uniform sampling with replacement.
  std::vector<const Transition<T>*> sample(std::size_t batch, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // slot of the oldest item once the ring is full
  std::vector<Transition<T>> items_;
};

}  // namespace rlnst
