#include "rlnst/params.hpp"

#include <algorithm>

namespace rlnst {

const char* owner_prefix(Owner owner) {
  switch (owner) {
    case Owner::actor: return "actor";
    case Owner::stylizer: return "stylizer";
    case Owner::critic: return "critic";
    case Owner::target_critic: return "target_critic";
    case Owner::alpha: return "alpha";
    case Owner::featnet: return "featnet";
  }
  return "?";
}

Owner owner_of(const std::string& name) {
  const auto head = name.substr(0, name.find('.'));
  for (auto o : {Owner::actor, Owner::stylizer, Owner::critic, Owner::target_critic, Owner::alpha, Owner::featnet}) {
    if (head == owner_prefix(o)) return o;
  }
  throw ArgumentError("parameter name '" + name + "' has no known owner prefix");
}

template <typename T>
Tensor<T> ParamRegistry<T>::add(const std::string& name, Tensor<T> tensor) {
  if (index_.count(name)) throw ArgumentError("duplicate parameter name '" + name + "'");
  index_[name] = entries_.size();
  entries_.push_back({name, owner_of(name), tensor});
  return tensor;
}

template <typename T>
const Tensor<T>& ParamRegistry<T>::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ArgumentError("no parameter named '" + name + "'");
  return entries_[it->second].tensor;
}

template <typename T>
Tensor<T>& ParamRegistry<T>::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ArgumentError("no parameter named '" + name + "'");
  return entries_[it->second].tensor;
}

template <typename T>
std::vector<Tensor<T>> ParamRegistry<T>::group(Owner owner) const {
  std::vector<Tensor<T>> out;
  for (const auto& e : entries_) {
    if (e.owner == owner) out.push_back(e.tensor);
  }
  return out;
}

template <typename T>
std::int64_t ParamRegistry<T>::count(Owner owner) const {
  std::int64_t n = 0;
  for (const auto& e : entries_) {
    if (e.owner == owner) n += e.tensor.numel();
  }
  return n;
}

template <typename T>
std::int64_t ParamRegistry<T>::count(std::initializer_list<Owner> owners) const {
  std::int64_t n = 0;
  for (auto o : owners) n += count(o);
  return n;
}

template <typename T>
void ParamRegistry<T>::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

template <typename T>
template <typename U>
void ParamRegistry<T>::assign_from(const ParamRegistry<U>& other) {
  for (const auto& e : other.entries()) {
    auto& dst = at(e.name);
    if (dst.shape() != e.tensor.shape()) {
      throw DimensionError("parameter '" + e.name + "': shape " + to_string(e.tensor.shape()) +
                           " does not match " + to_string(dst.shape()));
    }
    std::transform(e.tensor.data().begin(), e.tensor.data().end(), dst.data().begin(),
                   [](U v) { return static_cast<T>(v); });
  }
}

template class ParamRegistry<float>;
template class ParamRegistry<double>;
template void ParamRegistry<float>::assign_from(const ParamRegistry<float>&);
template void ParamRegistry<float>::assign_from(const ParamRegistry<double>&);
template void ParamRegistry<double>::assign_from(const ParamRegistry<float>&);
template void ParamRegistry<double>::assign_from(const ParamRegistry<double>&);

}  // namespace rlnst
