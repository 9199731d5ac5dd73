#pragma once

// Differentiable tensor operations. Layout is row-major channels-last:
// images and feature maps are [H x W x C], sequences are [D x C].

#include <memory>
#include <span>
#include <vector>

#include "stymam/tensor.hpp"

namespace stymam {

Tensor reshape(const Tensor& x, Shape shape);

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, Real c);
// x * s where s is a single-element (possibly learnable) tensor.
Tensor scale_by(const Tensor& x, const Tensor& s);
Tensor square(const Tensor& x);

// Reductions to a [1] tensor.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// 2D only.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Broadcast along the last axis: v has as many elements as x's last extent.
Tensor mul_channel(const Tensor& x, const Tensor& v);
Tensor add_channel(const Tensor& x, const Tensor& v);

// Row-wise helpers on [R x K] matrices; column vectors are [R x 1].
Tensor row_sum(const Tensor& x);
Tensor row_dot(const Tensor& a, const Tensor& b);
Tensor mul_rows(const Tensor& x, const Tensor& col);
Tensor repeat_cols(const Tensor& col, std::size_t k);
Tensor softmax_rows(const Tensor& x);

// Out row t = x row index[t]. index may repeat or omit rows.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index);

Tensor silu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor leaky_relu(const Tensor& x, Real slope);

// Pins which side of the kink each leaky_relu input sits on. While a pin is
// alive on this thread, leaky_relu calls record their sign pattern; after
// rewind() they replay the recorded patterns in call order instead. Finite
// differences taken under replay stay on the linear piece the recorded pass
// differentiated.
class ActivationPin {
 public:
  ActivationPin();
  ~ActivationPin();
  ActivationPin(const ActivationPin&) = delete;
  ActivationPin& operator=(const ActivationPin&) = delete;

  void rewind();

  struct State;

 private:
  State* previous_;
  std::unique_ptr<State> state_;
};
// log(max(sigmoid(x), floor)) and log(max(1 - sigmoid(x), floor)); zero gradient where clamped.
Tensor log_sigmoid(const Tensor& x, Real floor);
Tensor log_one_minus_sigmoid(const Tensor& x, Real floor);

// Dense cross-correlation. x [H x W x Cin], w [k x k x Cin x Cout], bias [Cout].
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride, std::size_t pad);
// Per-channel k x k cross-correlation, zero same-padding. kernels [k x k x C], k odd.
Tensor conv2d_depthwise(const Tensor& x, const Tensor& kernels);
// Pointwise linear map over the last axis. x [... x Cin], w [Cin x Cout], bias [Cout].
Tensor conv1x1(const Tensor& x, const Tensor& w, const Tensor& bias);

// [H x W x C] -> [1 x 1 x C] channel means.
Tensor global_avg_pool(const Tensor& x);
Tensor upsample_nearest2x(const Tensor& x);
// factor x factor mean pooling; ragged edge windows average only the cells they cover.
Tensor avg_pool(const Tensor& x, std::size_t factor);

// Diagonal linear recurrence h_t = a * h_{t-1} + u_t over rows of u [D x N],
// a [N], fixed initial state h0 (size N, untracked). Returns all h_t as [D x N].
Tensor diag_scan(const Tensor& u, const Tensor& a, std::span<const Real> h0);

}  // namespace stymam
