#include "stymam/ssm.hpp"

#include <cmath>

#include "stymam/errors.hpp"
#include "stymam/ops.hpp"

namespace stymam {

namespace {

void check_params(const Tensor& seq, const SSMParams& p, const SSMState& h0) {
  if (seq.rank() != 2 || seq.dim(1) != p.channels) {
    throw DimensionError("ssm_scan: sequence " + shape_str(seq.shape()) + " does not have " +
                         std::to_string(p.channels) + " channels");
  }
  if (h0.h.size() != p.state_dim) {
    throw DimensionError("ssm_scan: initial state has " + std::to_string(h0.h.size()) + " values, expected " +
                         std::to_string(p.state_dim));
  }
}

}  // namespace

SSMParams SSMParams::zeros(std::size_t state_dim, std::size_t channels, bool requires_grad) {
  SSMParams p;
  p.state_dim = state_dim;
  p.channels = channels;
  p.a_raw = Tensor::zeros({state_dim}, requires_grad);
  p.b = Tensor::zeros({state_dim, channels}, requires_grad);
  p.c_out = Tensor::zeros({channels, state_dim}, requires_grad);
  p.d = Tensor::zeros({channels}, requires_grad);
  p.w_b = Tensor::zeros({state_dim, channels}, requires_grad);
  p.w_c = Tensor::zeros({state_dim, channels}, requires_grad);
  return p;
}

SSMParams SSMParams::random(std::size_t state_dim, std::size_t channels, Rng& rng, bool requires_grad) {
  SSMParams p;
  p.state_dim = state_dim;
  p.channels = channels;
  p.a_raw = rng.uniform_tensor({state_dim}, -1.5, 1.5, requires_grad);
  p.b = rng.normal_tensor({state_dim, channels}, 1.0 / std::sqrt(static_cast<Real>(channels)), requires_grad);
  p.c_out = rng.normal_tensor({channels, state_dim}, 1.0 / std::sqrt(static_cast<Real>(state_dim)), requires_grad);
  p.d = rng.normal_tensor({channels}, 0.5, requires_grad);
  p.w_b = rng.normal_tensor({state_dim, channels}, 0.5 / std::sqrt(static_cast<Real>(channels)), requires_grad);
  p.w_c = rng.normal_tensor({state_dim, channels}, 0.5 / std::sqrt(static_cast<Real>(channels)), requires_grad);
  return p;
}

std::vector<Real> SSMParams::transition() const {
  std::vector<Real> a(state_dim);
  for (std::size_t i = 0; i < state_dim; ++i) a[i] = std::tanh(a_raw[i]);
  return a;
}

std::vector<Tensor> SSMParams::tensors() const {
  std::vector<Tensor> out{a_raw, b, c_out, d};
  if (selective) {
    out.push_back(w_b);
    out.push_back(w_c);
  }
  return out;
}

Tensor ssm_scan(const Tensor& seq, const SSMParams& p, const SSMState& h0) {
  check_params(seq, p, h0);
  const Tensor a = tanh(p.a_raw);
  const Tensor skip = mul_channel(seq, p.d);
  if (!p.selective) {
    const Tensor u = matmul(seq, transpose(p.b));       // [D x N], row t = B x_t
    const Tensor states = diag_scan(u, a, h0.h);         // [D x N]
    return add(matmul(states, transpose(p.c_out)), skip);
  }
  const Tensor b_sel = matmul(seq, transpose(p.w_b));  // row t = W_B x_t
  const Tensor c_sel = matmul(seq, transpose(p.w_c));  // row t = W_C x_t
  const Tensor u = mul_rows(b_sel, row_sum(seq));      // B_t x_t = (W_B x_t) * sum_c x_tc
  const Tensor states = diag_scan(u, a, h0.h);
  return add(repeat_cols(row_dot(c_sel, states), p.channels), skip);
}

Tensor ssm_scan(const Tensor& seq, const SSMParams& p) { return ssm_scan(seq, p, SSMState::zeros(p.state_dim)); }

SelectiveStep selective_params(std::span<const Real> x_t, const Tensor& w_b, const Tensor& w_c) {
  const std::size_t n = w_b.dim(0), c = w_b.dim(1);
  if (x_t.size() != c || w_c.shape() != w_b.shape()) {
    throw DimensionError("selective_params: token of length " + std::to_string(x_t.size()) + " vs weights " +
                         shape_str(w_b.shape()) + ", " + shape_str(w_c.shape()));
  }
  SelectiveStep s{std::vector<Real>(n * c), std::vector<Real>(c * n)};
  for (std::size_t i = 0; i < n; ++i) {
    Real bi = 0, ci = 0;
    for (std::size_t j = 0; j < c; ++j) {
      bi += w_b[i * c + j] * x_t[j];
      ci += w_c[i * c + j] * x_t[j];
    }
    for (std::size_t j = 0; j < c; ++j) {
      s.b[i * c + j] = bi;
      s.c[j * n + i] = ci;
    }
  }
  return s;
}

Tensor ssm_scan_naive(const Tensor& seq, const SSMParams& p, const SSMState& h0) {
  check_params(seq, p, h0);
  const std::size_t steps = seq.dim(0), n = p.state_dim, c = p.channels;
  const std::vector<Real> a = p.transition();
  std::vector<Real> h = h0.h, next(n);
  std::vector<Real> out(steps * c);
  for (std::size_t t = 0; t < steps; ++t) {
    const std::span<const Real> x = seq.data().subspan(t * c, c);
    std::span<const Real> bm = p.b.data();
    std::span<const Real> cm = p.c_out.data();
    SelectiveStep sel;
    if (p.selective) {
      sel = selective_params(x, p.w_b, p.w_c);
      bm = sel.b;
      cm = sel.c;
    }
    for (std::size_t i = 0; i < n; ++i) {
      Real acc = a[i] * h[i];
      for (std::size_t j = 0; j < c; ++j) acc += bm[i * c + j] * x[j];
      next[i] = acc;
    }
    h.swap(next);
    for (std::size_t j = 0; j < c; ++j) {
      Real acc = p.d[j] * x[j];
      for (std::size_t i = 0; i < n; ++i) acc += cm[j * n + i] * h[i];
      out[t * c + j] = acc;
    }
  }
  return Tensor::from({steps, c}, std::move(out));
}

}  // namespace stymam
