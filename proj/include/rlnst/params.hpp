#pragma once

#include <map>
#include <string>
#include <vector>

#include "rlnst/tensor.hpp"

namespace rlnst {

enum class Owner { actor, stylizer, critic, target_critic, alpha, featnet };

const char* owner_prefix(Owner owner);
// Owner implied by a parameter name's first dotted component.
Owner owner_of(const std::string& name);

// Ordered name -> tensor map. Networks keep handles to the same tensors, so
// updating a registry entry in place updates the network.
template <typename T>
class ParamRegistry {
 public:
  struct Entry {
    std::string name;
    Owner owner;
    Tensor<T> tensor;
  };

  // Registers `tensor` under `name`; the owner is derived from the prefix.
  Tensor<T> add(const std::string& name, Tensor<T> tensor);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Tensor<T>& at(const std::string& name) const;
  Tensor<T>& at(const std::string& name);

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  std::vector<Tensor<T>> group(Owner owner) const;
  std::int64_t count(Owner owner) const;
  std::int64_t count(std::initializer_list<Owner> owners) const;

  void zero_grad();

  // Copies values of every entry in `other` into the same-named entry here.
  // Names and shapes must agree exactly.
  template <typename U>
  void assign_from(const ParamRegistry<U>& other);

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace rlnst
