#include "rlnst/replay.hpp"

namespace rlnst {

template <typename T>
ReplayPool<T>::ReplayPool(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ArgumentError("replay pool capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity, 1024));
}

template <typename T>
void ReplayPool<T>::push(Transition<T> t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
    return;
  }
  items_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

template <typename T>
const Transition<T>& ReplayPool<T>::at(std::size_t i) const {
  if (i >= items_.size()) {
    throw ArgumentError("replay index " + std::to_string(i) + " out of range (size " + std::to_string(size()) + ")");
  }
  return items_[(head_ + i) % items_.size()];
}

template <typename T>
std::vector<const Transition<T>*> ReplayPool<T>::sample(std::size_t batch, Rng& rng) const {
  if (items_.empty()) throw ArgumentError("cannot sample from an empty replay pool");
  std::vector<const Transition<T>*> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) out.push_back(&at(rng.below(items_.size())));
  return out;
}

template class ReplayPool<float>;
template class ReplayPool<double>;

}  // namespace rlnst
