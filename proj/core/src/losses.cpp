#include "stymam/losses.hpp"

#include <cmath>

#include "stymam/checkpoint.hpp"
#include "stymam/errors.hpp"
#include "stymam/ops.hpp"
#include "stymam/rng.hpp"

namespace stymam {

namespace {

std::vector<ConvLayer> shaped_stages(const std::vector<std::size_t>& widths) {
  if (widths.size() != FeatureExtractor::kStages) throw ConfigError("feature extractor needs exactly 4 stage widths");
  std::vector<ConvLayer> stages;
  std::size_t cin = 3;
  for (auto w : widths) {
    stages.push_back({Tensor::zeros({3, 3, cin, w}), Tensor::zeros({w})});
    cin = w;
  }
  return stages;
}

Tensor mean_of(const std::vector<Tensor>& terms) {
  Tensor acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
  return scale(acc, 1.0 / static_cast<Real>(terms.size()));
}

}  // namespace

FeatureExtractor FeatureExtractor::seeded(std::uint64_t seed, std::vector<std::size_t> widths) {
  FeatureExtractor fx;
  fx.stages_ = shaped_stages(widths);
  Rng rng(seed);
  for (auto& s : fx.stages_) {
    const Real stddev = std::sqrt(2.0 / static_cast<Real>(9 * s.w.dim(2)));
    s.w = rng.normal_tensor(s.w.shape(), stddev);
    s.b = rng.normal_tensor(s.b.shape(), 0.1);
  }
  return fx;
}

FeatureExtractor FeatureExtractor::from_file(const std::filesystem::path& path, std::vector<std::size_t> widths) {
  FeatureExtractor fx;
  fx.stages_ = shaped_stages(widths);
  load_checkpoint(path, fx.params());
  return fx;
}

ParamList FeatureExtractor::params() const {
  ParamList out;
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    out.push_back({"phi.stage" + std::to_string(i) + ".w", stages_[i].w});
    out.push_back({"phi.stage" + std::to_string(i) + ".b", stages_[i].b});
  }
  return out;
}

std::vector<Tensor> FeatureExtractor::features(const Tensor& img) const {
  std::vector<Tensor> out;
  Tensor x = img;
  for (const auto& s : stages_) {
    x = silu(conv2d(x, s.w, s.b, 2, 1));
    out.push_back(x);
  }
  return out;
}

Tensor content_loss(const Tensor& content, const Tensor& stylized, const FeatureExtractor& phi) {
  if (content.shape() != stylized.shape()) {
    throw DimensionError("content_loss: content " + shape_str(content.shape()) + " vs stylized " + shape_str(stylized.shape()));
  }
  std::vector<Tensor> target;
  {
    NoGradGuard no_grad;
    target = phi.features(content.detach());
  }
  const auto pred = phi.features(stylized);
  Tensor loss = mean(square(sub(pred[0], target[0])));
  for (std::size_t i = 1; i < pred.size(); ++i) loss = add(loss, mean(square(sub(pred[i], target[i]))));
  return loss;
}

Tensor adv_loss_discriminator(const std::vector<Tensor>& real_logits, const std::vector<Tensor>& fake_logits) {
  if (real_logits.empty() || real_logits.size() != fake_logits.size()) {
    throw DimensionError("adv_loss_discriminator: need the same positive number of real and fake maps");
  }
  std::vector<Tensor> terms;
  for (std::size_t m = 0; m < real_logits.size(); ++m) {
    terms.push_back(add(mean(log_sigmoid(real_logits[m], kProbabilityFloor)),
                        mean(log_one_minus_sigmoid(fake_logits[m], kProbabilityFloor))));
  }
  return scale(mean_of(terms), -1.0);
}

Tensor adv_loss_generator(const std::vector<Tensor>& fake_logits, GeneratorLossMode mode) {
  if (fake_logits.empty()) throw DimensionError("adv_loss_generator: no logit maps");
  std::vector<Tensor> terms;
  for (const auto& f : fake_logits) {
    terms.push_back(mode == GeneratorLossMode::Saturating ? mean(log_one_minus_sigmoid(f, kProbabilityFloor))
                                                          : mean(log_sigmoid(f, kProbabilityFloor)));
  }
  const Tensor avg = mean_of(terms);
  return mode == GeneratorLossMode::Saturating ? avg : scale(avg, -1.0);
}

Tensor total_loss(const Tensor& content, const Tensor& adv_generator, const LossWeights& w) {
  return add(scale(content, w.content), scale(adv_generator, w.adversarial));
}

}  // namespace stymam
