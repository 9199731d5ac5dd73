#pragma once

// Explicit-loop reference implementations used as oracles by the test suites
// and `stymam selftest`. They operate on plain values, never record a graph,
// and share no code with the differentiable operations they check.

#include <vector>

#include "stymam/generator.hpp"
#include "stymam/losses.hpp"
#include "stymam/tensor.hpp"

namespace stymam::reference {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor conv2d_depthwise(const Tensor& x, const Tensor& kernels);
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride, std::size_t pad);

// Channel attention, 1x1 conv, reweighting, HW x HW attention and its
// application, each as nested loops.
Tensor crsa(const Tensor& features, const CRSAWeights& w);

Real content_loss(const Tensor& content, const Tensor& stylized, const FeatureExtractor& phi);
Real adv_loss_discriminator(const std::vector<Tensor>& real_logits, const std::vector<Tensor>& fake_logits);
Real adv_loss_generator(const std::vector<Tensor>& fake_logits, GeneratorLossMode mode);

}  // namespace stymam::reference
