#include "rlnst/rng.hpp"

#include <cmath>
#include <numbers>

namespace rlnst {

namespace {
std::uint64_t mix(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace

std::uint64_t Rng::next_u64() {
  return mix(mix(seed_) ^ (counter_++ * 0xD1B54A32D192ED03ULL));
}

double Rng::uniform() {
  // (k + 0.5) / 2^53 lies strictly inside (0, 1).
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
  if (spare_normal_) {
    const double v = *spare_normal_;
    spare_normal_.reset();
    return v;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(theta);
  return r * std::cos(theta);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw ArgumentError("Rng::below(0)");
  // Rejection keeps the draw exactly uniform.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % n;
}

Rng Rng::fork(std::uint64_t tag) const {
  return Rng(mix(seed_ ^ mix(tag + 0x632BE59BD9B4E019ULL)));
}

template <typename T>
Tensor<T> Rng::normal_tensor(Shape shape, double stddev) {
  auto t = Tensor<T>::zeros(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(stddev * normal());
  return t;
}

template <typename T>
Tensor<T> Rng::uniform_tensor(Shape shape, double lo, double hi) {
  auto t = Tensor<T>::zeros(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(uniform(lo, hi));
  return t;
}

template Tensor<float> Rng::normal_tensor<float>(Shape, double);
template Tensor<double> Rng::normal_tensor<double>(Shape, double);
template Tensor<float> Rng::uniform_tensor<float>(Shape, double, double);
template Tensor<double> Rng::uniform_tensor<double>(Shape, double, double);

}  // namespace rlnst
