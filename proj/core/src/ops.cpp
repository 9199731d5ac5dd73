#include "stymam/ops.hpp"

#include <algorithm>
#include <cmath>

#include "stymam/errors.hpp"

namespace stymam {

namespace {

Node& input(Node& self, std::size_t i) { return *self.inputs[i]; }

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

void require_rank(const char* op, const Tensor& x, std::size_t rank) {
  if (x.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(x.shape()));
  }
}

Real sigmoid_scalar(Real x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const Real e = std::exp(x);
  return e / (1.0 + e);
}

// Elementwise unary op given f(x) and f'(x).
template <class F, class DF>
Tensor unary(const char* op, const Tensor& x, F f, DF df) {
  std::vector<Real> out(x.numel());
  const auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  return make_result(op, x.shape(), std::move(out), {x}, [df](Node& self) {
    Node& xn = input(self, 0);
    auto& gx = xn.grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * df(xn.value[i]);
  });
}

}  // namespace

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  std::vector<Real> out(x.data().begin(), x.data().end());
  return make_result("reshape", std::move(shape), std::move(out), {x}, [](Node& self) {
    auto& gx = input(self, 0).grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<Real> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return make_result("add", a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      Node& n = input(self, k);
      if (!n.requires_grad) continue;
      auto& g = n.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<Real> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return make_result("sub", a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      Node& n = input(self, k);
      if (!n.requires_grad) continue;
      const Real sign = k == 0 ? 1.0 : -1.0;
      auto& g = n.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<Real> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return make_result("mul", a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& an = input(self, 0);
    Node& bn = input(self, 1);
    if (an.requires_grad) {
      auto& g = an.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bn.value[i];
    }
    if (bn.requires_grad) {
      auto& g = bn.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * an.value[i];
    }
  });
}

Tensor scale(const Tensor& x, Real c) {
  std::vector<Real> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * x[i];
  return make_result("scale", x.shape(), std::move(out), {x}, [c](Node& self) {
    auto& g = input(self, 0).grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += c * self.grad[i];
  });
}

Tensor scale_by(const Tensor& x, const Tensor& s) {
  if (s.numel() != 1) throw DimensionError("scale_by: factor must have one element, got " + shape_str(s.shape()));
  const Real c = s[0];
  std::vector<Real> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * x[i];
  return make_result("scale_by", x.shape(), std::move(out), {x, s}, [](Node& self) {
    Node& xn = input(self, 0);
    Node& sn = input(self, 1);
    if (xn.requires_grad) {
      auto& g = xn.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sn.value[0] * self.grad[i];
    }
    if (sn.requires_grad) {
      Real acc = 0;
      for (std::size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * xn.value[i];
      sn.grad_buffer()[0] += acc;
    }
  });
}

Tensor square(const Tensor& x) {
  return unary("square", x, [](Real v) { return v * v; }, [](Real v) { return 2 * v; });
}

Tensor sum(const Tensor& x) {
  Real acc = 0;
  for (Real v : x.data()) acc += v;
  return make_result("sum", {1}, {acc}, {x}, [](Node& self) {
    auto& g = input(self, 0).grad_buffer();
    for (auto& gi : g) gi += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  Real acc = 0;
  for (Real v : x.data()) acc += v;
  const Real inv = 1.0 / static_cast<Real>(x.numel());
  return make_result("mean", {1}, {acc * inv}, {x}, [inv](Node& self) {
    auto& g = input(self, 0).grad_buffer();
    for (auto& gi : g) gi += self.grad[0] * inv;
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner extents differ, " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  std::vector<Real> out(m * n, 0.0);
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    Real* row = &out[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      const Real aip = av[i * k + p];
      const Real* brow = &bv[p * n];
      for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
    }
  }
  return make_result("matmul", {m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    Node& an = input(self, 0);
    Node& bn = input(self, 1);
    const auto& go = self.grad;
    if (an.requires_grad) {
      auto& ga = an.grad_buffer();  // go * b^T
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          Real acc = 0;
          for (std::size_t j = 0; j < n; ++j) acc += go[i * n + j] * bn.value[p * n + j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (bn.requires_grad) {
      auto& gb = bn.grad_buffer();  // a^T * go
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const Real aip = an.value[i * k + p];
          Real* grow = &gb[p * n];
          for (std::size_t j = 0; j < n; ++j) grow[j] += aip * go[i * n + j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank("transpose", a, 2);
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<Real> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a[i * c + j];
  return make_result("transpose", {c, r}, std::move(out), {a}, [r, c](Node& self) {
    auto& g = input(self, 0).grad_buffer();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
  });
}

Tensor mul_channel(const Tensor& x, const Tensor& v) {
  const std::size_t c = x.shape().back();
  if (v.numel() != c) {
    throw DimensionError("mul_channel: " + shape_str(v.shape()) + " does not broadcast over " + shape_str(x.shape()));
  }
  std::vector<Real> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * v[i % c];
  return make_result("mul_channel", x.shape(), std::move(out), {x, v}, [c](Node& self) {
    Node& xn = input(self, 0);
    Node& vn = input(self, 1);
    if (xn.requires_grad) {
      auto& g = xn.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * vn.value[i % c];
    }
    if (vn.requires_grad) {
      auto& g = vn.grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % c] += self.grad[i] * xn.value[i];
    }
  });
}

Tensor add_channel(const Tensor& x, const Tensor& v) {
  const std::size_t c = x.shape().back();
  if (v.numel() != c) {
    throw DimensionError("add_channel: " + shape_str(v.shape()) + " does not broadcast over " + shape_str(x.shape()));
  }
  std::vector<Real> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + v[i % c];
  return make_result("add_channel", x.shape(), std::move(out), {x, v}, [c](Node& self) {
    Node& xn = input(self, 0);
    Node& vn = input(self, 1);
    if (xn.requires_grad) {
      auto& g = xn.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (vn.requires_grad) {
      auto& g = vn.grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % c] += self.grad[i];
    }
  });
}

Tensor row_sum(const Tensor& x) {
  require_rank("row_sum", x, 2);
  const std::size_t r = x.dim(0), k = x.dim(1);
  std::vector<Real> out(r, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < k; ++j) out[i] += x[i * k + j];
  return make_result("row_sum", {r, 1}, std::move(out), {x}, [r, k](Node& self) {
    auto& g = input(self, 0).grad_buffer();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < k; ++j) g[i * k + j] += self.grad[i];
  });
}

Tensor row_dot(const Tensor& a, const Tensor& b) {
  require_rank("row_dot", a, 2);
  require_same_shape("row_dot", a, b);
  const std::size_t r = a.dim(0), k = a.dim(1);
  std::vector<Real> out(r, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < k; ++j) out[i] += a[i * k + j] * b[i * k + j];
  return make_result("row_dot", {r, 1}, std::move(out), {a, b}, [r, k](Node& self) {
    Node& an = input(self, 0);
    Node& bn = input(self, 1);
    if (an.requires_grad) {
      auto& g = an.grad_buffer();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < k; ++j) g[i * k + j] += self.grad[i] * bn.value[i * k + j];
    }
    if (bn.requires_grad) {
      auto& g = bn.grad_buffer();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < k; ++j) g[i * k + j] += self.grad[i] * an.value[i * k + j];
    }
  });
}

Tensor mul_rows(const Tensor& x, const Tensor& col) {
  require_rank("mul_rows", x, 2);
  const std::size_t r = x.dim(0), k = x.dim(1);
  if (col.numel() != r) {
    throw DimensionError("mul_rows: column " + shape_str(col.shape()) + " vs matrix " + shape_str(x.shape()));
  }
  std::vector<Real> out(r * k);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] = x[i * k + j] * col[i];
  return make_result("mul_rows", {r, k}, std::move(out), {x, col}, [r, k](Node& self) {
    Node& xn = input(self, 0);
    Node& cn = input(self, 1);
    if (xn.requires_grad) {
      auto& g = xn.grad_buffer();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < k; ++j) g[i * k + j] += self.grad[i * k + j] * cn.value[i];
    }
    if (cn.requires_grad) {
      auto& g = cn.grad_buffer();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < k; ++j) g[i] += self.grad[i * k + j] * xn.value[i * k + j];
    }
  });
}

Tensor repeat_cols(const Tensor& col, std::size_t k) {
  const std::size_t r = col.numel();
  std::vector<Real> out(r * k);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] = col[i];
  return make_result("repeat_cols", {r, k}, std::move(out), {col}, [r, k](Node& self) {
    auto& g = input(self, 0).grad_buffer();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < k; ++j) g[i] += self.grad[i * k + j];
  });
}

Tensor softmax_rows(const Tensor& x) {
  require_rank("softmax_rows", x, 2);
  const std::size_t r = x.dim(0), k = x.dim(1);
  std::vector<Real> out(r * k);
  for (std::size_t i = 0; i < r; ++i) {
    Real mx = x[i * k];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, x[i * k + j]);
    Real z = 0;
    for (std::size_t j = 0; j < k; ++j) z += out[i * k + j] = std::exp(x[i * k + j] - mx);
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] /= z;
  }
  return make_result("softmax_rows", {r, k}, out, {x}, [r, k, out](Node& self) {
    auto& g = input(self, 0).grad_buffer();
    for (std::size_t i = 0; i < r; ++i) {
      Real dot = 0;
      for (std::size_t j = 0; j < k; ++j) dot += self.grad[i * k + j] * out[i * k + j];
      for (std::size_t j = 0; j < k; ++j) g[i * k + j] += out[i * k + j] * (self.grad[i * k + j] - dot);
    }
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index) {
  require_rank("gather_rows", x, 2);
  const std::size_t r = x.dim(0), k = x.dim(1);
  std::vector<Real> out(index.size() * k);
  for (std::size_t t = 0; t < index.size(); ++t) {
    if (index[t] >= r) throw DimensionError("gather_rows: index " + std::to_string(index[t]) + " out of range");
    std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(index[t] * k), k, out.begin() + static_cast<std::ptrdiff_t>(t * k));
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return make_result("gather_rows", {idx.size(), k}, std::move(out), {x}, [idx, k](Node& self) {
    auto& g = input(self, 0).grad_buffer();
    for (std::size_t t = 0; t < idx.size(); ++t)
      for (std::size_t j = 0; j < k; ++j) g[idx[t] * k + j] += self.grad[t * k + j];
  });
}

Tensor silu(const Tensor& x) {
  return unary(
      "silu", x, [](Real v) { return v * sigmoid_scalar(v); },
      [](Real v) {
        const Real s = sigmoid_scalar(v);
        return s * (1 + v * (1 - s));
      });
}

Tensor sigmoid(const Tensor& x) {
  return unary("sigmoid", x, sigmoid_scalar, [](Real v) {
    const Real s = sigmoid_scalar(v);
    return s * (1 - s);
  });
}

Tensor tanh(const Tensor& x) {
  return unary(
      "tanh", x, [](Real v) { return std::tanh(v); },
      [](Real v) {
        const Real t = std::tanh(v);
        return 1 - t * t;
      });
}

struct ActivationPin::State {
  std::vector<std::vector<bool>> patterns;
  bool replay = false;
  std::size_t cursor = 0;
};

namespace {
thread_local ActivationPin::State* active_pin = nullptr;
}  // namespace

ActivationPin::ActivationPin() : previous_(active_pin), state_(std::make_unique<State>()) { active_pin = state_.get(); }

ActivationPin::~ActivationPin() { active_pin = previous_; }

void ActivationPin::rewind() {
  state_->replay = true;
  state_->cursor = 0;
}

Tensor leaky_relu(const Tensor& x, Real slope) {
  const auto xv = x.data();
  std::vector<bool> positive(xv.size());
  if (active_pin && active_pin->replay) {
    if (active_pin->cursor >= active_pin->patterns.size() ||
        active_pin->patterns[active_pin->cursor].size() != xv.size()) {
      throw UsageError("leaky_relu: replayed pass does not match the recorded one");
    }
    positive = active_pin->patterns[active_pin->cursor++];
  } else {
    for (std::size_t i = 0; i < xv.size(); ++i) positive[i] = xv[i] > 0;
    if (active_pin) active_pin->patterns.push_back(positive);
  }
  std::vector<Real> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = positive[i] ? xv[i] : slope * xv[i];
  return make_result("leaky_relu", x.shape(), std::move(out), {x}, [slope, positive = std::move(positive)](Node& self) {
    auto& gx = input(self, 0).grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * (positive[i] ? 1.0 : slope);
  });
}

Tensor log_sigmoid(const Tensor& x, Real floor) {
  return unary(
      "log_sigmoid", x, [floor](Real v) { return std::log(std::max(sigmoid_scalar(v), floor)); },
      [floor](Real v) {
        const Real s = sigmoid_scalar(v);
        return s > floor ? 1 - s : 0.0;
      });
}

Tensor log_one_minus_sigmoid(const Tensor& x, Real floor) {
  // 1 - sigmoid(v) = sigmoid(-v)
  return unary(
      "log_one_minus_sigmoid", x, [floor](Real v) { return std::log(std::max(sigmoid_scalar(-v), floor)); },
      [floor](Real v) {
        const Real s = sigmoid_scalar(-v);
        return s > floor ? -(1 - s) : 0.0;
      });
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride, std::size_t pad) {
  require_rank("conv2d", x, 3);
  require_rank("conv2d", w, 4);
  const std::size_t h = x.dim(0), wd = x.dim(1), cin = x.dim(2);
  const std::size_t k = w.dim(0), cout = w.dim(3);
  if (w.dim(1) != k || w.dim(2) != cin) {
    throw DimensionError("conv2d: weights " + shape_str(w.shape()) + " do not fit input " + shape_str(x.shape()));
  }
  if (bias.numel() != cout) throw DimensionError("conv2d: bias " + shape_str(bias.shape()) + " for " + std::to_string(cout) + " outputs");
  if (stride == 0) throw ConfigError("conv2d: stride must be positive");
  if (h + 2 * pad < k || wd + 2 * pad < k) {
    throw DimensionError("conv2d: input " + shape_str(x.shape()) + " smaller than kernel " + std::to_string(k));
  }
  const std::size_t oh = (h + 2 * pad - k) / stride + 1;
  const std::size_t ow = (wd + 2 * pad - k) / stride + 1;

  std::vector<Real> out(oh * ow * cout);
  const Real* xv = x.data().data();
  const Real* wv = w.data().data();
  for (std::size_t oy = 0; oy < oh; ++oy) {
    for (std::size_t ox = 0; ox < ow; ++ox) {
      Real* o = &out[(oy * ow + ox) * cout];
      for (std::size_t co = 0; co < cout; ++co) o[co] = bias[co];
      for (std::size_t ky = 0; ky < k; ++ky) {
        const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
        if (iy < 0 || iy >= static_cast<long>(h)) continue;
        for (std::size_t kx = 0; kx < k; ++kx) {
          const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
          if (ix < 0 || ix >= static_cast<long>(wd)) continue;
          const Real* xp = xv + (static_cast<std::size_t>(iy) * wd + static_cast<std::size_t>(ix)) * cin;
          const Real* wp = wv + (ky * k + kx) * cin * cout;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const Real xval = xp[ci];
            const Real* wr = wp + ci * cout;
            for (std::size_t co = 0; co < cout; ++co) o[co] += xval * wr[co];
          }
        }
      }
    }
  }

  return make_result("conv2d", {oh, ow, cout}, std::move(out), {x, w, bias},
                     [=](Node& self) {
                       Node& xn = input(self, 0);
                       Node& wn = input(self, 1);
                       Node& bn = input(self, 2);
                       const Real* go = self.grad.data();
                       Real* gx = xn.requires_grad ? xn.grad_buffer().data() : nullptr;
                       Real* gw = wn.requires_grad ? wn.grad_buffer().data() : nullptr;
                       if (bn.requires_grad) {
                         auto& gb = bn.grad_buffer();
                         for (std::size_t p = 0; p < oh * ow; ++p)
                           for (std::size_t co = 0; co < cout; ++co) gb[co] += go[p * cout + co];
                       }
                       if (!gx && !gw) return;
                       for (std::size_t oy = 0; oy < oh; ++oy) {
                         for (std::size_t ox = 0; ox < ow; ++ox) {
                           const Real* g = go + (oy * ow + ox) * cout;
                           for (std::size_t ky = 0; ky < k; ++ky) {
                             const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                             if (iy < 0 || iy >= static_cast<long>(h)) continue;
                             for (std::size_t kx = 0; kx < k; ++kx) {
                               const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                               if (ix < 0 || ix >= static_cast<long>(wd)) continue;
                               const std::size_t xoff =
                                   (static_cast<std::size_t>(iy) * wd + static_cast<std::size_t>(ix)) * cin;
                               const std::size_t woff = (ky * k + kx) * cin * cout;
                               for (std::size_t ci = 0; ci < cin; ++ci) {
                                 const Real* wr = wn.value.data() + woff + ci * cout;
                                 if (gx) {
                                   Real acc = 0;
                                   for (std::size_t co = 0; co < cout; ++co) acc += g[co] * wr[co];
                                   gx[xoff + ci] += acc;
                                 }
                                 if (gw) {
                                   const Real xval = xn.value[xoff + ci];
                                   Real* gwr = gw + woff + ci * cout;
                                   for (std::size_t co = 0; co < cout; ++co) gwr[co] += xval * g[co];
                                 }
                               }
                             }
                           }
                         }
                       }
                     });
}

Tensor conv2d_depthwise(const Tensor& x, const Tensor& kernels) {
  require_rank("conv2d_depthwise", x, 3);
  require_rank("conv2d_depthwise", kernels, 3);
  const std::size_t k = kernels.dim(0);
  if (k % 2 == 0) throw ConfigError("conv2d_depthwise: kernel size must be odd, got " + std::to_string(k));
  const std::size_t h = x.dim(0), wd = x.dim(1), c = x.dim(2);
  if (kernels.dim(1) != k || kernels.dim(2) != c) {
    throw DimensionError("conv2d_depthwise: kernels " + shape_str(kernels.shape()) + " do not fit input " +
                         shape_str(x.shape()));
  }
  const long r = static_cast<long>(k / 2);
  auto for_each_tap = [=](auto&& fn) {
    for (long y = 0; y < static_cast<long>(h); ++y)
      for (long xx = 0; xx < static_cast<long>(wd); ++xx)
        for (long dy = -r; dy <= r; ++dy) {
          const long iy = y + dy;
          if (iy < 0 || iy >= static_cast<long>(h)) continue;
          for (long dx = -r; dx <= r; ++dx) {
            const long ix = xx + dx;
            if (ix < 0 || ix >= static_cast<long>(wd)) continue;
            const std::size_t o = (static_cast<std::size_t>(y) * wd + static_cast<std::size_t>(xx)) * c;
            const std::size_t i = (static_cast<std::size_t>(iy) * wd + static_cast<std::size_t>(ix)) * c;
            const std::size_t kk = static_cast<std::size_t>((dy + r) * static_cast<long>(k) + (dx + r)) * c;
            fn(o, i, kk);
          }
        }
  };
  std::vector<Real> out(x.numel(), 0.0);
  const Real* xv = x.data().data();
  const Real* kv = kernels.data().data();
  for_each_tap([&](std::size_t o, std::size_t i, std::size_t kk) {
    for (std::size_t ch = 0; ch < c; ++ch) out[o + ch] += xv[i + ch] * kv[kk + ch];
  });
  return make_result("conv2d_depthwise", x.shape(), std::move(out), {x, kernels}, [=](Node& self) {
    Node& xn = input(self, 0);
    Node& kn = input(self, 1);
    Real* gx = xn.requires_grad ? xn.grad_buffer().data() : nullptr;
    Real* gk = kn.requires_grad ? kn.grad_buffer().data() : nullptr;
    const Real* go = self.grad.data();
    for_each_tap([&](std::size_t o, std::size_t i, std::size_t kk) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        if (gx) gx[i + ch] += go[o + ch] * kn.value[kk + ch];
        if (gk) gk[kk + ch] += go[o + ch] * xn.value[i + ch];
      }
    });
  });
}

Tensor conv1x1(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require_rank("conv1x1", w, 2);
  const std::size_t cin = x.shape().back();
  const std::size_t cout = w.dim(1);
  if (w.dim(0) != cin) {
    throw DimensionError("conv1x1: weights " + shape_str(w.shape()) + " do not fit input " + shape_str(x.shape()));
  }
  if (bias.numel() != cout) throw DimensionError("conv1x1: bias " + shape_str(bias.shape()) + " for " + std::to_string(cout) + " outputs");
  const std::size_t sites = x.numel() / cin;
  Shape oshape = x.shape();
  oshape.back() = cout;
  std::vector<Real> out(sites * cout);
  const Real* xv = x.data().data();
  const Real* wv = w.data().data();
  for (std::size_t p = 0; p < sites; ++p) {
    Real* o = &out[p * cout];
    for (std::size_t co = 0; co < cout; ++co) o[co] = bias[co];
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const Real xval = xv[p * cin + ci];
      for (std::size_t co = 0; co < cout; ++co) o[co] += xval * wv[ci * cout + co];
    }
  }
  return make_result("conv1x1", std::move(oshape), std::move(out), {x, w, bias}, [=](Node& self) {
    Node& xn = input(self, 0);
    Node& wn = input(self, 1);
    Node& bn = input(self, 2);
    const Real* go = self.grad.data();
    if (xn.requires_grad) {
      auto& gx = xn.grad_buffer();
      for (std::size_t p = 0; p < sites; ++p)
        for (std::size_t ci = 0; ci < cin; ++ci) {
          Real acc = 0;
          for (std::size_t co = 0; co < cout; ++co) acc += go[p * cout + co] * wn.value[ci * cout + co];
          gx[p * cin + ci] += acc;
        }
    }
    if (wn.requires_grad) {
      auto& gw = wn.grad_buffer();
      for (std::size_t p = 0; p < sites; ++p)
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const Real xval = xn.value[p * cin + ci];
          for (std::size_t co = 0; co < cout; ++co) gw[ci * cout + co] += xval * go[p * cout + co];
        }
    }
    if (bn.requires_grad) {
      auto& gb = bn.grad_buffer();
      for (std::size_t p = 0; p < sites; ++p)
        for (std::size_t co = 0; co < cout; ++co) gb[co] += go[p * cout + co];
    }
  });
}

Tensor global_avg_pool(const Tensor& x) {
  require_rank("global_avg_pool", x, 3);
  const std::size_t sites = x.dim(0) * x.dim(1), c = x.dim(2);
  std::vector<Real> out(c, 0.0);
  for (std::size_t p = 0; p < sites; ++p)
    for (std::size_t ch = 0; ch < c; ++ch) out[ch] += x[p * c + ch];
  const Real inv = 1.0 / static_cast<Real>(sites);
  for (auto& v : out) v *= inv;
  return make_result("global_avg_pool", {1, 1, c}, std::move(out), {x}, [sites, c, inv](Node& self) {
    auto& g = input(self, 0).grad_buffer();
    for (std::size_t p = 0; p < sites; ++p)
      for (std::size_t ch = 0; ch < c; ++ch) g[p * c + ch] += self.grad[ch] * inv;
  });
}

Tensor upsample_nearest2x(const Tensor& x) {
  require_rank("upsample_nearest2x", x, 3);
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  const std::size_t oh = 2 * h, ow = 2 * w;
  std::vector<Real> out(oh * ow * c);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t xx = 0; xx < ow; ++xx)
      for (std::size_t ch = 0; ch < c; ++ch) out[(y * ow + xx) * c + ch] = x[((y / 2) * w + xx / 2) * c + ch];
  return make_result("upsample_nearest2x", {oh, ow, c}, std::move(out), {x}, [=](Node& self) {
    auto& g = input(self, 0).grad_buffer();
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xx = 0; xx < ow; ++xx)
        for (std::size_t ch = 0; ch < c; ++ch) g[((y / 2) * w + xx / 2) * c + ch] += self.grad[(y * ow + xx) * c + ch];
  });
}

Tensor avg_pool(const Tensor& x, std::size_t factor) {
  require_rank("avg_pool", x, 3);
  if (factor == 0) throw ConfigError("avg_pool: factor must be positive");
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  const std::size_t oh = (h + factor - 1) / factor, ow = (w + factor - 1) / factor;
  // Each output cell averages the input cells it covers.
  std::vector<Real> counts(oh * ow, 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t xx = 0; xx < w; ++xx) counts[(y / factor) * ow + xx / factor] += 1.0;
  std::vector<Real> out(oh * ow * c, 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t xx = 0; xx < w; ++xx) {
      const std::size_t o = (y / factor) * ow + xx / factor;
      for (std::size_t ch = 0; ch < c; ++ch) out[o * c + ch] += x[(y * w + xx) * c + ch] / counts[o];
    }
  return make_result("avg_pool", {oh, ow, c}, std::move(out), {x}, [=](Node& self) {
    auto& g = input(self, 0).grad_buffer();
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx) {
        const std::size_t o = (y / factor) * ow + xx / factor;
        for (std::size_t ch = 0; ch < c; ++ch) g[(y * w + xx) * c + ch] += self.grad[o * c + ch] / counts[o];
      }
  });
}

Tensor diag_scan(const Tensor& u, const Tensor& a, std::span<const Real> h0) {
  require_rank("diag_scan", u, 2);
  const std::size_t steps = u.dim(0), n = u.dim(1);
  if (a.numel() != n) throw DimensionError("diag_scan: transition " + shape_str(a.shape()) + " vs inputs " + shape_str(u.shape()));
  if (h0.size() != n) throw DimensionError("diag_scan: initial state has " + std::to_string(h0.size()) + " values, expected " + std::to_string(n));
  std::vector<Real> init(h0.begin(), h0.end());
  std::vector<Real> out(steps * n);
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t i = 0; i < n; ++i) {
      const Real prev = t == 0 ? init[i] : out[(t - 1) * n + i];
      out[t * n + i] = a[i] * prev + u[t * n + i];
    }
  return make_result("diag_scan", {steps, n}, std::move(out), {u, a}, [steps, n, init](Node& self) {
    Node& un = input(self, 0);
    Node& an = input(self, 1);
    // Reverse-time adjoint: lambda_t = g_t + a * lambda_{t+1}.
    std::vector<Real> lambda(n, 0.0);
    Real* gu = un.requires_grad ? un.grad_buffer().data() : nullptr;
    Real* ga = an.requires_grad ? an.grad_buffer().data() : nullptr;
    for (std::size_t t = steps; t-- > 0;) {
      for (std::size_t i = 0; i < n; ++i) {
        lambda[i] = self.grad[t * n + i] + (t + 1 < steps ? an.value[i] * lambda[i] : 0.0);
        if (gu) gu[t * n + i] += lambda[i];
        if (ga) {
          const Real prev = t == 0 ? init[i] : self.value[(t - 1) * n + i];
          ga[i] += lambda[i] * prev;
        }
      }
    }
  });
}

}  // namespace stymam
