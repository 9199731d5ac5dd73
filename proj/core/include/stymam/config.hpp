#pragma once

// Training configuration and its flat `key = value` file format.
// Lines are UTF-8; `#` starts a comment; blank lines are ignored. Keys are the
// TrainConfig field names. `profile` (desk | paper) is applied first and the
// remaining keys override it, regardless of order in the file.

#include <cstdint>
#include <filesystem>
#include <string>

#include "stymam/discriminator.hpp"
#include "stymam/generator.hpp"
#include "stymam/losses.hpp"

namespace stymam {

enum class Profile { Desk, Paper };

Profile parse_profile(const std::string& name);
const char* to_string(Profile p);

struct TrainConfig {
  std::string profile = "desk";
  Real lr_g = 2e-4;
  Real lr_d = 2e-4;
  Real beta1 = 0.5;
  Real beta2 = 0.999;
  Real adam_eps = 1e-8;
  std::size_t batch_size = 1;
  std::size_t max_steps = 500;
  std::uint64_t seed = 0;
  std::size_t image_size = 32;
  LossWeights loss;  // keys lambda_c, lambda_adv
  GeneratorLossMode generator_loss = GeneratorLossMode::NonSaturating;
  std::size_t checkpoint_every = 100;
  std::filesystem::path content_dir;
  std::filesystem::path style_dir;
  std::filesystem::path metrics_path = "metrics.csv";
  std::filesystem::path checkpoint_path = "stymam.ckpt";
  std::uint64_t extractor_seed = 1234;
  std::filesystem::path extractor_weights;  // empty: seeded random extractor
  GeneratorConfig generator = GeneratorConfig::desk();
  DiscriminatorConfig discriminator = DiscriminatorConfig::desk();

  static TrainConfig for_profile(Profile p);
  void validate() const;
};

// Throws ConfigError naming the offending key or line.
TrainConfig parse_train_config(const std::string& text);
TrainConfig load_train_config(const std::filesystem::path& path);

// Applies STYMAM_SEED if set.
void apply_env_overrides(TrainConfig& cfg);

}  // namespace stymam
