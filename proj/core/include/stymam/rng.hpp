#pragma once

#include <cstdint>
#include <random>

#include "stymam/tensor.hpp"

namespace stymam {

// Seeded source for weight init and synthetic data. Streams are reproducible
// on a given build; nothing here is intended to match other implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  Real normal(Real stddev = 1.0) { return std::normal_distribution<Real>(0.0, stddev)(engine_); }
  Real uniform(Real lo, Real hi) { return std::uniform_real_distribution<Real>(lo, hi)(engine_); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }

  Tensor normal_tensor(Shape shape, Real stddev, bool requires_grad = false) {
    std::vector<Real> v(shape_numel(shape));
    for (auto& x : v) x = normal(stddev);
    return Tensor::from(std::move(shape), std::move(v), requires_grad);
  }

  Tensor uniform_tensor(Shape shape, Real lo, Real hi, bool requires_grad = false) {
    std::vector<Real> v(shape_numel(shape));
    for (auto& x : v) x = uniform(lo, hi);
    return Tensor::from(std::move(shape), std::move(v), requires_grad);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace stymam
