#include "stymam/discriminator.hpp"

#include <cmath>

#include "stymam/errors.hpp"
#include "stymam/ops.hpp"

namespace stymam {

DiscriminatorConfig DiscriminatorConfig::desk() { return {}; }

DiscriminatorConfig DiscriminatorConfig::paper() {
  DiscriminatorConfig c;
  c.scales = 3;
  return c;
}

void DiscriminatorConfig::validate() const {
  if (scales == 0) throw ConfigError("discriminator needs at least one scale");
  if (widths.empty()) throw ConfigError("discriminator needs at least one hidden layer");
  for (auto w : widths) {
    if (w == 0) throw ConfigError("discriminator widths must be positive");
  }
}

DiscriminatorWeights DiscriminatorWeights::init(const DiscriminatorConfig& config, Rng& rng) {
  config.validate();
  DiscriminatorWeights d;
  d.config = config;
  for (std::size_t m = 0; m < config.scales; ++m) {
    std::vector<ConvLayer> layers;
    std::size_t cin = 3;
    auto add_layer = [&](std::size_t cout) {
      const Real stddev = 1.0 / std::sqrt(static_cast<Real>(9 * cin));
      layers.push_back({rng.normal_tensor({3, 3, cin, cout}, stddev, true), Tensor::zeros({cout}, true)});
      cin = cout;
    };
    for (auto w : config.widths) add_layer(w);
    add_layer(1);
    d.per_scale.push_back(std::move(layers));
  }
  return d;
}

ParamList DiscriminatorWeights::params() const {
  ParamList out;
  for (std::size_t m = 0; m < per_scale.size(); ++m) {
    for (std::size_t l = 0; l < per_scale[m].size(); ++l) {
      const std::string prefix = "disc.scale" + std::to_string(m) + ".conv" + std::to_string(l);
      out.push_back({prefix + ".w", per_scale[m][l].w});
      out.push_back({prefix + ".b", per_scale[m][l].b});
    }
  }
  return out;
}

Tensor downsample_avg(const Tensor& img, std::size_t factor) {
  if (factor == 0 || (factor & (factor - 1)) != 0) {
    throw ConfigError("downsample_avg: factor " + std::to_string(factor) + " is not a power of two");
  }
  if (factor == 1) return img;
  return avg_pool(img, factor);
}

std::vector<Tensor> disc_forward(const Tensor& img, const DiscriminatorWeights& w) {
  if (img.rank() != 3 || img.dim(2) != 3) throw DimensionError("disc_forward: expected [H x W x 3], got " + shape_str(img.shape()));
  std::vector<Tensor> logits;
  logits.reserve(w.per_scale.size());
  for (std::size_t m = 0; m < w.per_scale.size(); ++m) {
    Tensor x = downsample_avg(img, std::size_t{1} << m);
    if (x.dim(0) < kMinDiscriminatorInput || x.dim(1) < kMinDiscriminatorInput) {
      throw ConfigError("disc_forward: scale " + std::to_string(m) + " input " + shape_str(x.shape()) +
                        " is below the 16x16 minimum; use a larger image or fewer scales");
    }
    const auto& layers = w.per_scale[m];
    for (std::size_t l = 0; l < layers.size(); ++l) {
      x = conv2d(x, layers[l].w, layers[l].b, 2, 1);
      if (l + 1 < layers.size()) x = leaky_relu(x, w.config.leaky_slope);
    }
    logits.push_back(std::move(x));
  }
  return logits;
}

}  // namespace stymam
