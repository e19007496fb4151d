#pragma once

#include <cstdint>
#include <optional>

#include "rlnst/tensor.hpp"

namespace rlnst {

// Counter-based generator: draw i is a SplitMix64 finalization of
// (seed, i), so sequences are reproducible bit for bit on any platform.
// Normals use the Box-Muller transform on pairs of uniforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64();
  // Uniform on the open interval (0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  // Independent stream keyed by `tag`; the parent sequence is unaffected.
  Rng fork(std::uint64_t tag) const;

  template <typename T>
  Tensor<T> normal_tensor(Shape shape, double stddev = 1.0);
  template <typename T>
  Tensor<T> uniform_tensor(Shape shape, double lo, double hi);

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  std::optional<double> spare_normal_;
};

}  // namespace rlnst
