#pragma once

// Discrete state-space recurrence over a token sequence:
//   h_t = A h_{t-1} + B x_t
//   y_t = C h_t + D (.) x_t
// with diagonal A = tanh(a_raw) so |A_i| < 1.
//
// In selective mode B and C depend on the current token:
//   B_t = (W_B x_t) 1^T   (N x C)
//   C_t = 1 (W_C x_t)^T   (C x N)

#include <span>
#include <vector>

#include "stymam/rng.hpp"
#include "stymam/tensor.hpp"

namespace stymam {

struct SSMParams {
  std::size_t state_dim = 0;  // N
  std::size_t channels = 0;   // C
  Tensor a_raw;               // [N]
  Tensor b;                   // [N x C]
  Tensor c_out;               // [C x N]
  Tensor d;                   // [C]
  bool selective = false;
  Tensor w_b;  // [N x C], only used when selective
  Tensor w_c;  // [N x C], only used when selective

  static SSMParams zeros(std::size_t state_dim, std::size_t channels, bool requires_grad = false);
  static SSMParams random(std::size_t state_dim, std::size_t channels, Rng& rng, bool requires_grad = false);

  // tanh(a_raw) as plain values.
  std::vector<Real> transition() const;
  std::vector<Tensor> tensors() const;
};

struct SSMState {
  std::vector<Real> h;

  static SSMState zeros(std::size_t n) { return {std::vector<Real>(n, 0.0)}; }
};

// Differentiable scan; [D x C] -> [D x C].
Tensor ssm_scan(const Tensor& seq, const SSMParams& p, const SSMState& h0);
Tensor ssm_scan(const Tensor& seq, const SSMParams& p);

// Step-by-step reference loop on plain values (no graph).
Tensor ssm_scan_naive(const Tensor& seq, const SSMParams& p, const SSMState& h0);

struct SelectiveStep {
  std::vector<Real> b;  // N x C row-major
  std::vector<Real> c;  // C x N row-major
};

// Input-dependent (B_t, C_t) for one token x_t of length C.
SelectiveStep selective_params(std::span<const Real> x_t, const Tensor& w_b, const Tensor& w_c);

}  // namespace stymam
