#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "stymam/discriminator.hpp"
#include "stymam/tensor.hpp"

namespace stymam {

inline constexpr Real kProbabilityFloor = 1e-7;

// Frozen 4-stage perceptual pyramid, each stage conv3x3 stride 2 + SiLU.
// Default weights are seeded random; a pretrained set can be loaded from a
// checkpoint file with tensors "phi.stage{i}.w" / "phi.stage{i}.b".
class FeatureExtractor {
 public:
  static constexpr std::size_t kStages = 4;

  static FeatureExtractor seeded(std::uint64_t seed, std::vector<std::size_t> widths = {16, 32, 32, 32});
  static FeatureExtractor from_file(const std::filesystem::path& path, std::vector<std::size_t> widths = {16, 32, 32, 32});

  // Stage outputs phi_1..phi_4 for an [H x W x 3] image.
  std::vector<Tensor> features(const Tensor& img) const;

  const std::vector<ConvLayer>& stages() const { return stages_; }
  ParamList params() const;

 private:
  std::vector<ConvLayer> stages_;
};

struct LossWeights {
  Real content = 1.0;      // lambda_c
  Real adversarial = 5.0;  // lambda_adv
};

enum class GeneratorLossMode { Saturating, NonSaturating };

// sum_i mean((phi_i(content) - phi_i(stylized))^2); the content side is detached.
Tensor content_loss(const Tensor& content, const Tensor& stylized, const FeatureExtractor& phi);

// -(1/M) sum_m [ mean log sigmoid(real_m) + mean log(1 - sigmoid(fake_m)) ]
Tensor adv_loss_discriminator(const std::vector<Tensor>& real_logits, const std::vector<Tensor>& fake_logits);

// Saturating:     (1/M) sum_m mean log(1 - sigmoid(fake_m))
// NonSaturating: -(1/M) sum_m mean log sigmoid(fake_m)
Tensor adv_loss_generator(const std::vector<Tensor>& fake_logits, GeneratorLossMode mode);

Tensor total_loss(const Tensor& content, const Tensor& adv_generator, const LossWeights& w);

}  // namespace stymam
