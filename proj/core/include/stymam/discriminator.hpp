#pragma once

// Multi-scale PatchGAN discriminator. Scale m sees the image average-pooled by
// 2^m and emits a grid of per-patch logits (no sigmoid here).

#include <vector>

#include "stymam/generator.hpp"
#include "stymam/rng.hpp"
#include "stymam/tensor.hpp"

namespace stymam {

struct DiscriminatorConfig {
  std::size_t scales = 2;                       // M
  std::vector<std::size_t> widths = {64, 128};  // hidden channels; last layer maps to 1
  Real leaky_slope = 0.2;

  static DiscriminatorConfig desk();
  static DiscriminatorConfig paper();
  void validate() const;
  // Total stride of the conv stack.
  std::size_t stride_product() const { return std::size_t{1} << (widths.size() + 1); }
};

inline constexpr std::size_t kMinDiscriminatorInput = 16;

struct ConvLayer {
  Tensor w, b;  // [3 x 3 x Cin x Cout], [Cout]
};

struct DiscriminatorWeights {
  DiscriminatorConfig config;
  std::vector<std::vector<ConvLayer>> per_scale;

  static DiscriminatorWeights init(const DiscriminatorConfig& config, Rng& rng);
  ParamList params() const;
};

// factor x factor mean pooling; factor must be a power of two.
Tensor downsample_avg(const Tensor& img, std::size_t factor);

// One logit map per scale, [h_m x w_m x 1].
std::vector<Tensor> disc_forward(const Tensor& img, const DiscriminatorWeights& w);

}  // namespace stymam
