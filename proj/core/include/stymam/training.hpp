#pragma once

// Alternating GAN optimisation: one discriminator update, then one generator
// update on lambda_c * content + lambda_adv * adversarial.

#include <functional>
#include <ostream>
#include <vector>

#include "stymam/adam.hpp"
#include "stymam/config.hpp"
#include "stymam/discriminator.hpp"
#include "stymam/generator.hpp"
#include "stymam/losses.hpp"
#include "stymam/rng.hpp"

namespace stymam {

struct TrainMetrics {
  std::size_t step = 0;
  Real loss_d = 0;
  Real loss_g = 0;  // adversarial generator term
  Real loss_c = 0;
  Real loss_total = 0;
};

inline constexpr const char* kMetricsHeader = "step,loss_d,loss_g,loss_c,loss_total";
std::string metrics_row(const TrainMetrics& m);

class Trainer {
 public:
  // Content and style images must be [S x S x 3] in [-1, 1] and non-empty.
  Trainer(const TrainConfig& config, std::vector<Tensor> content, std::vector<Tensor> style);

  // One D update followed by one G update. Throws NumericError naming the
  // first non-finite quantity.
  TrainMetrics step();

  std::size_t steps_done() const { return steps_; }
  const TrainConfig& config() const { return config_; }
  const GeneratorWeights& generator() const { return gen_; }
  const DiscriminatorWeights& discriminator() const { return disc_; }
  const FeatureExtractor& extractor() const { return extractor_; }

  // Generator then discriminator tensors, as stored in checkpoints.
  ParamList checkpoint_params() const;

 private:
  TrainConfig config_;
  std::vector<Tensor> content_, style_;
  Rng rng_;
  GeneratorWeights gen_;
  DiscriminatorWeights disc_;
  FeatureExtractor extractor_;
  Adam opt_g_, opt_d_;
  std::size_t steps_ = 0;
};

FeatureExtractor make_extractor(const TrainConfig& config);

// Full run: loads data, trains for max_steps, appends one CSV row per step to
// config.metrics_path (flushed each step) and checkpoints every
// checkpoint_every steps and at the end. `on_step` may be empty.
void run_training(const TrainConfig& config, const std::function<void(const TrainMetrics&)>& on_step = {});

}  // namespace stymam
