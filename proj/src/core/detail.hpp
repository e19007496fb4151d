#pragma once

#include "rlnst/autograd.hpp"

namespace rlnst::detail {

// Gradient buffer of `t` if it participates in differentiation, else null.
template <typename T>
inline Buffer<T>* grad_of(const Tensor<T>& t) {
  if (!t.defined() || !t.impl()->requires_grad) return nullptr;
  return &t.impl()->grad_buffer();
}

template <typename T>
inline void require_rank(const Tensor<T>& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(what) + ": expected rank " + std::to_string(rank) +
                         " tensor, got shape " + to_string(t.shape()));
  }
}

}  // namespace rlnst::detail
