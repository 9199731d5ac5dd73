#include "stymam/adam.hpp"

#include <cmath>

#include "stymam/errors.hpp"

namespace stymam {

void adam_update(std::span<Real> param, std::span<const Real> grad, AdamMoments& moments, const AdamHyper& hyper) {
  if (param.size() != grad.size() || moments.m.size() != param.size() || moments.v.size() != param.size()) {
    throw DimensionError("adam_update: parameter, gradient and moment sizes differ");
  }
  ++moments.step;
  const Real t = static_cast<Real>(moments.step);
  const Real bc1 = 1 - std::pow(hyper.beta1, t);
  const Real bc2 = 1 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < param.size(); ++i) {
    moments.m[i] = hyper.beta1 * moments.m[i] + (1 - hyper.beta1) * grad[i];
    moments.v[i] = hyper.beta2 * moments.v[i] + (1 - hyper.beta2) * grad[i] * grad[i];
    const Real m_hat = moments.m[i] / bc1;
    const Real v_hat = moments.v[i] / bc2;
    param[i] -= hyper.lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
  }
}

Adam::Adam(ParamList params, AdamHyper hyper) : params_(std::move(params)), hyper_(hyper) {
  for (const auto& p : params_) moments_.emplace_back(p.tensor.numel());
}

void Adam::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

void Adam::step() {
  std::vector<Real> zeros;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor t = params_[i].tensor;
    auto g = t.grad();
    if (g.empty()) {
      zeros.assign(t.numel(), 0.0);
      g = zeros;
    }
    adam_update(t.mutable_data(), g, moments_[i], hyper_);
  }
}

}  // namespace stymam
