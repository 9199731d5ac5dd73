#pragma once

#include <span>
#include <vector>

#include "stymam/generator.hpp"

namespace stymam {

struct AdamHyper {
  Real lr = 2e-4;
  Real beta1 = 0.5;
  Real beta2 = 0.999;
  Real eps = 1e-8;
};

struct AdamMoments {
  std::vector<Real> m, v;
  std::size_t step = 0;

  explicit AdamMoments(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

// One bias-corrected Adam step on `param` in place.
void adam_update(std::span<Real> param, std::span<const Real> grad, AdamMoments& moments, const AdamHyper& hyper);

// Adam over a fixed parameter list. Tensors without a gradient are treated as zero-gradient.
class Adam {
 public:
  Adam(ParamList params, AdamHyper hyper);

  void zero_grad();
  void step();
  const ParamList& params() const { return params_; }

 private:
  ParamList params_;
  AdamHyper hyper_;
  std::vector<AdamMoments> moments_;
};

}  // namespace stymam
