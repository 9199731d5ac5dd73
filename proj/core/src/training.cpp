#include "stymam/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "stymam/checkpoint.hpp"
#include "stymam/errors.hpp"
#include "stymam/image.hpp"
#include "stymam/ops.hpp"

namespace stymam {

namespace {

void require_finite(Real v, const std::string& what, std::size_t step) {
  if (!std::isfinite(v)) throw NumericError("non-finite " + what + " at step " + std::to_string(step));
}

void require_finite(const Tensor& t, const std::string& what, std::size_t step) {
  for (Real v : t.data()) require_finite(v, what, step);
}

void require_finite_grads(const ParamList& params, std::size_t step) {
  for (const auto& p : params) {
    for (Real v : p.tensor.grad()) require_finite(v, "gradient of " + p.name, step);
  }
}

Tensor batch_mean(std::vector<Tensor> terms) {
  Tensor acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
  return terms.size() == 1 ? acc : scale(acc, 1.0 / static_cast<Real>(terms.size()));
}

AdamHyper hyper(const TrainConfig& c, Real lr) { return {lr, c.beta1, c.beta2, c.adam_eps}; }

}  // namespace

std::string metrics_row(const TrainMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g", m.step, m.loss_d, m.loss_g, m.loss_c, m.loss_total);
  return buf;
}

FeatureExtractor make_extractor(const TrainConfig& config) {
  return config.extractor_weights.empty() ? FeatureExtractor::seeded(config.extractor_seed)
                                          : FeatureExtractor::from_file(config.extractor_weights);
}

Trainer::Trainer(const TrainConfig& config, std::vector<Tensor> content, std::vector<Tensor> style)
    : config_(config),
      content_(std::move(content)),
      style_(std::move(style)),
      rng_(config.seed),
      gen_(GeneratorWeights::init(config.generator, rng_)),
      disc_(DiscriminatorWeights::init(config.discriminator, rng_)),
      extractor_(make_extractor(config)),
      opt_g_(gen_.params(), hyper(config, config.lr_g)),
      opt_d_(disc_.params(), hyper(config, config.lr_d)) {
  config_.validate();
  if (content_.empty()) throw DataError("no content images");
  if (style_.empty()) throw DataError("no style images");
}

ParamList Trainer::checkpoint_params() const {
  ParamList out = gen_.params();
  for (auto& p : disc_.params()) out.push_back(p);
  return out;
}

TrainMetrics Trainer::step() {
  const std::size_t step_no = steps_ + 1;
  std::vector<std::size_t> ci(config_.batch_size), si(config_.batch_size);
  for (std::size_t b = 0; b < config_.batch_size; ++b) {
    ci[b] = rng_.index(content_.size());
    si[b] = rng_.index(style_.size());
  }
  TrainMetrics m;
  m.step = step_no;

  // Discriminator half-step on detached fakes.
  {
    std::vector<Tensor> fakes;
    {
      NoGradGuard no_grad;
      for (auto i : ci) fakes.push_back(generator_forward(content_[i], gen_));
    }
    std::vector<Tensor> terms;
    for (std::size_t b = 0; b < config_.batch_size; ++b) {
      terms.push_back(adv_loss_discriminator(disc_forward(style_[si[b]], disc_), disc_forward(fakes[b], disc_)));
    }
    const Tensor loss_d = batch_mean(std::move(terms));
    m.loss_d = loss_d.item();
    require_finite(m.loss_d, "loss_d", step_no);
    opt_d_.zero_grad();
    backward(loss_d);
    require_finite_grads(opt_d_.params(), step_no);
    opt_d_.step();
  }

  // Generator half-step; discriminator gradients from this pass are discarded.
  {
    std::vector<Tensor> content_terms, adv_terms;
    for (auto i : ci) {
      const Tensor fake = generator_forward(content_[i], gen_);
      require_finite(fake, "generator output", step_no);
      content_terms.push_back(content_loss(content_[i], fake, extractor_));
      adv_terms.push_back(adv_loss_generator(disc_forward(fake, disc_), config_.generator_loss));
    }
    const Tensor loss_c = batch_mean(std::move(content_terms));
    const Tensor loss_g = batch_mean(std::move(adv_terms));
    const Tensor loss_total = total_loss(loss_c, loss_g, config_.loss);
    m.loss_c = loss_c.item();
    m.loss_g = loss_g.item();
    m.loss_total = loss_total.item();
    require_finite(m.loss_c, "loss_c", step_no);
    require_finite(m.loss_g, "loss_g", step_no);
    require_finite(m.loss_total, "loss_total", step_no);
    opt_g_.zero_grad();
    backward(loss_total);
    opt_d_.zero_grad();
    require_finite_grads(opt_g_.params(), step_no);
    opt_g_.step();
  }
  steps_ = step_no;
  return m;
}

void run_training(const TrainConfig& config, const std::function<void(const TrainMetrics&)>& on_step) {
  config.validate();
  auto content = load_image_dir(config.content_dir, config.image_size);
  auto style = load_image_dir(config.style_dir, config.image_size);
  Trainer trainer(config, std::move(content), std::move(style));

  std::ofstream metrics(config.metrics_path, std::ios::trunc);
  if (!metrics) throw DataError("cannot open metrics file " + config.metrics_path.string());
  metrics << kMetricsHeader << '\n' << std::flush;
  for (std::size_t s = 0; s < config.max_steps; ++s) {
    const TrainMetrics m = trainer.step();
    metrics << metrics_row(m) << '\n' << std::flush;
    if (on_step) on_step(m);
    if (m.step % config.checkpoint_every == 0 || m.step == config.max_steps) {
      save_checkpoint(trainer.checkpoint_params(), config.checkpoint_path);
    }
  }
}

}  // namespace stymam
