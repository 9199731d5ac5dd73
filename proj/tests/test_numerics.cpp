#include "doctest.h"

#include <cmath>
#include <functional>

#include "stymam/errors.hpp"
#include "stymam/gradcheck.hpp"
#include "stymam/ops.hpp"
#include "stymam/reference.hpp"
#include "stymam/rng.hpp"
#include "support/helpers.hpp"

using namespace stymam;
using stymam::test::bitwise_equal;
using stymam::test::max_abs_diff;

namespace {

// Random-weighted sum of an op's output so every output element contributes.
Real op_grad_error(const std::function<Tensor()>& op, const std::vector<Tensor>& inputs, std::uint64_t seed = 3) {
  Tensor probe;
  {
    NoGradGuard g;
    probe = op();
  }
  Rng rng(seed);
  const Tensor w = rng.normal_tensor(probe.shape(), 1.0);
  return finite_diff_check([&] { return sum(mul(op(), w)); }, inputs, 1e-5).max_rel_error;
}

}  // namespace

TEST_SUITE("numerics") {

TEST_CASE("tensor construction validates shape and data") {
  CHECK_THROWS_AS(Tensor::from({2, 0}, {}), DimensionError);
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), DimensionError);
  const Tensor t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.numel() == 6);
  CHECK(t.rank() == 2);
  CHECK(t[4] == 5);
  CHECK_THROWS_AS((void)t.item(), UsageError);
  CHECK(Tensor::scalar(2.5).item() == 2.5);
}

TEST_CASE("matmul examples") {
  const Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  Rng rng(1);
  const Tensor x = rng.normal_tensor({2, 2}, 1.0);
  CHECK(bitwise_equal(matmul(eye, x), x));

  const Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  const Tensor b = Tensor::from({2, 1}, {0, 1});
  const Tensor ab = matmul(a, b);
  CHECK(ab.shape() == Shape{2, 1});
  CHECK(ab[0] == 2);
  CHECK(ab[1] == 4);

  const Tensor p = rng.normal_tensor({5, 7}, 1.0);
  const Tensor q = rng.normal_tensor({7, 3}, 1.0);
  CHECK(max_abs_diff(matmul(p, q), reference::matmul(p, q)) < 1e-12);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  const Tensor a = Tensor::zeros({2, 3});
  const Tensor b = Tensor::zeros({2, 3});
  try {
    (void)matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
  }
}

TEST_CASE("depthwise convolution") {
  Rng rng(2);
  const Tensor x = rng.normal_tensor({6, 6, 3}, 1.0);
  std::vector<Real> delta(27, 0.0);
  for (std::size_t c = 0; c < 3; ++c) delta[(1 * 3 + 1) * 3 + c] = 1.0;
  CHECK(bitwise_equal(conv2d_depthwise(x, Tensor::from({3, 3, 3}, delta)), x));

  const Tensor ones = Tensor::full({5, 5, 1}, 1.0);
  const Tensor out = conv2d_depthwise(ones, Tensor::full({3, 3, 1}, 1.0));
  CHECK(out[2 * 5 + 2] == 9);
  CHECK(out[0] == 4);
  CHECK(out[4] == 4);
  CHECK(out[24] == 4);
  CHECK(out[1] == 6);

  const Tensor k = rng.normal_tensor({3, 3, 3}, 1.0);
  CHECK(max_abs_diff(conv2d_depthwise(x, k), reference::conv2d_depthwise(x, k)) < 1e-12);

  CHECK_THROWS_AS((void)conv2d_depthwise(x, Tensor::zeros({2, 2, 3})), ConfigError);
}

TEST_CASE("conv1x1") {
  Rng rng(3);
  const Tensor x = rng.normal_tensor({4, 5, 3}, 1.0);
  const Tensor eye = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  CHECK(bitwise_equal(conv1x1(x, eye, Tensor::zeros({3})), x));

  std::vector<Real> v(6 * 6 * 2, 0.0);
  v[(3 * 6 + 4) * 2 + 0] = 3;
  v[(3 * 6 + 4) * 2 + 1] = 4;
  const Tensor y = conv1x1(Tensor::from({6, 6, 2}, v), Tensor::from({2, 1}, {1, 1}), Tensor::zeros({1}));
  CHECK(y[3 * 6 + 4] == 7);

  const Tensor w = rng.normal_tensor({3, 2}, 1.0);
  const Tensor b = rng.normal_tensor({2}, 1.0);
  const Tensor got = conv1x1(x, w, b);
  Tensor expect = add_channel(reshape(reference::matmul(reshape(x, {20, 3}), w), {4, 5, 2}), b);
  CHECK(max_abs_diff(got, expect) < 1e-12);

  CHECK_THROWS_AS((void)conv1x1(x, Tensor::zeros({2, 2}), Tensor::zeros({2})), DimensionError);
}

TEST_CASE("dense convolution matches the loop oracle") {
  Rng rng(4);
  const Tensor x = rng.normal_tensor({9, 7, 3}, 1.0);
  const Tensor w = rng.normal_tensor({3, 3, 3, 4}, 1.0);
  const Tensor b = rng.normal_tensor({4}, 1.0);
  for (std::size_t stride : {1, 2}) {
    for (std::size_t pad : {0, 1}) {
      CHECK(max_abs_diff(conv2d(x, w, b, stride, pad), reference::conv2d(x, w, b, stride, pad)) < 1e-12);
    }
  }
  CHECK(conv2d(Tensor::zeros({32, 32, 3}), Tensor::zeros({3, 3, 3, 2}), Tensor::zeros({2}), 2, 1).shape() ==
        Shape{16, 16, 2});
}

TEST_CASE("silu") {
  CHECK(silu(Tensor::scalar(0.0)).item() == 0.0);
  CHECK(silu(Tensor::scalar(1.0)).item() == doctest::Approx(0.731059).epsilon(1e-6));
  CHECK(silu(Tensor::scalar(40.0)).item() == doctest::Approx(40.0));
  CHECK(std::abs(silu(Tensor::scalar(-40.0)).item()) < 1e-15);
}

TEST_CASE("global average pooling") {
  const Tensor seven = Tensor::full({3, 4, 2}, 7.0);
  const Tensor g = global_avg_pool(seven);
  CHECK(g.shape() == Shape{1, 1, 2});
  CHECK(g[0] == 7.0);
  CHECK(g[1] == 7.0);

  Rng rng(5);
  const Tensor one = rng.normal_tensor({1, 1, 3}, 1.0);
  CHECK(bitwise_equal(global_avg_pool(one), one));

  const Tensor x = rng.normal_tensor({4, 4, 2}, 1.0);
  const Tensor gx = global_avg_pool(x);
  for (std::size_t c = 0; c < 2; ++c) {
    Real s = 0;
    for (std::size_t i = 0; i < 16; ++i) s += x[i * 2 + c];
    CHECK(std::abs(gx[c] - s / 16) < 1e-15);
  }
}

TEST_CASE("average pooling and upsampling") {
  const Tensor checker = Tensor::from({4, 4, 1}, {0, 1, 0, 1, 1, 0, 1, 0, 0, 1, 0, 1, 1, 0, 1, 0});
  const Tensor pooled = avg_pool(checker, 2);
  CHECK(pooled.shape() == Shape{2, 2, 1});
  for (Real v : pooled.data()) CHECK(v == 0.5);

  // Ragged edge windows average only what they cover.
  const Tensor ragged = avg_pool(Tensor::from({3, 1, 1}, {1, 3, 8}), 2);
  CHECK(ragged.shape() == Shape{2, 1, 1});
  CHECK(ragged[0] == 2);
  CHECK(ragged[1] == 8);

  const Tensor up = upsample_nearest2x(Tensor::from({1, 2, 1}, {1, 2}));
  CHECK(up.shape() == Shape{2, 4, 1});
  CHECK(std::vector<Real>(up.data().begin(), up.data().end()) == std::vector<Real>{1, 1, 2, 2, 1, 1, 2, 2});
}

TEST_CASE("backward basics") {
  const Tensor x = Tensor::scalar(3.0, true);
  backward(x);
  REQUIRE(x.grad().size() == 1);
  CHECK(x.grad()[0] == 1.0);

  Rng rng(6);
  const Tensor v = rng.normal_tensor({5}, 1.0, true);
  backward(sum(mul(v, v)));
  for (std::size_t i = 0; i < 5; ++i) CHECK(v.grad()[i] == 2 * v[i]);

  const Tensor untracked = rng.normal_tensor({5}, 1.0);
  const Tensor tracked = rng.normal_tensor({5}, 1.0, true);
  backward(sum(mul(untracked, tracked)));
  CHECK(untracked.grad().empty());

  CHECK_THROWS_AS(backward(mul(tracked, tracked)), UsageError);
}

TEST_CASE("gradients accumulate until cleared") {
  Tensor x = Tensor::from({2}, {1.0, -2.0}, true);
  backward(sum(x));
  backward(sum(x));
  CHECK(x.grad()[0] == 2.0);
  x.zero_grad();
  backward(sum(scale(x, 3.0)));
  CHECK(x.grad()[1] == 3.0);
}

TEST_CASE("backward is linear in the objective") {
  Rng rng(7);
  Tensor x = rng.normal_tensor({3, 4}, 1.0, true);
  const Tensor m = rng.normal_tensor({4, 4}, 1.0);
  auto f = [&] { return sum(tanh(matmul(x, m))); };
  auto g = [&] { return mean(square(silu(x))); };
  const Real a = 0.7, b = -1.3;

  backward(f());
  const std::vector<Real> gf(x.grad().begin(), x.grad().end());
  x.zero_grad();
  backward(g());
  const std::vector<Real> gg(x.grad().begin(), x.grad().end());
  x.zero_grad();
  backward(add(scale(f(), a), scale(g(), b)));
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(std::abs(x.grad()[i] - (a * gf[i] + b * gg[i])) < 1e-12);
}

TEST_CASE("reshape round trip is bitwise") {
  Rng rng(8);
  const Tensor x = rng.normal_tensor({2, 3, 4}, 1.0);
  CHECK(bitwise_equal(reshape(reshape(x, {6, 4}), {2, 3, 4}), x));
  CHECK_THROWS_AS((void)reshape(x, {5, 5}), DimensionError);
}

TEST_CASE("graph trace is topological and visits each node once") {
  const Tensor a = Tensor::scalar(2.0, true);
  const Tensor b = Tensor::scalar(5.0, true);
  const Tensor c = mul(a, b);
  const Tensor d = add(c, a);  // a reached twice
  const Tensor e = mul(d, c);  // c reached twice
  const Graph g = Graph::trace(e);
  const auto& nodes = g.nodes();
  CHECK(nodes.size() == 5);
  std::vector<const Node*> seen;
  for (const Node* n : nodes) {
    for (const auto& in : n->inputs) {
      CHECK(std::find(seen.begin(), seen.end(), in.get()) != seen.end());
    }
    CHECK(std::find(seen.begin(), seen.end(), n) == seen.end());
    seen.push_back(n);
  }
  CHECK(nodes.back() == e.node().get());

  backward(e);
  // e = (ab + a) ab; de/da = (b + 1) ab + (ab + a) b, de/db = a ab + (ab + a) a
  CHECK(a.grad()[0] == doctest::Approx(6 * 10 + 12 * 5));
  CHECK(b.grad()[0] == doctest::Approx(2 * 10 + 12 * 2));
}

TEST_CASE("no-grad guard records nothing") {
  const Tensor x = Tensor::scalar(1.0, true);
  Tensor y;
  {
    NoGradGuard g;
    CHECK_FALSE(grad_enabled());
    y = mul(x, x);
  }
  CHECK(grad_enabled());
  CHECK_FALSE(y.requires_grad());
  CHECK(y.node()->inputs.empty());
}

TEST_CASE("mutable data is limited to leaves") {
  const Tensor x = Tensor::scalar(1.0, true);
  Tensor y = mul(x, x);
  CHECK_THROWS_AS((void)y.mutable_data(), UsageError);
}

TEST_CASE("forward ops keep finite inputs finite") {
  Rng rng(9);
  const Tensor x = rng.normal_tensor({4, 4, 3}, 30.0);
  for (const Tensor& t : {silu(x), sigmoid(x), tanh(x), leaky_relu(x, 0.2), log_sigmoid(x, 1e-7),
                          log_one_minus_sigmoid(x, 1e-7), softmax_rows(reshape(x, {16, 3}))}) {
    for (Real v : t.data()) CHECK(std::isfinite(v));
  }
}

TEST_CASE("finite difference checker") {
  Rng rng(10);
  const Tensor x = rng.normal_tensor({6}, 1.0);
  const Tensor w = rng.normal_tensor({6}, 1.0);
  // No truncation error for a linear f, so a wide step only shrinks round-off.
  CHECK(finite_diff_check([&](const Tensor& t) { return sum(mul(t, w)); }, x, 1e-2) < 1e-10);
  CHECK(finite_diff_check([&](const Tensor& t) { return sum(mul(silu(t), w)); }, x, 1e-5) < 1e-4);

  const Tensor leaf = rng.normal_tensor({3}, 1.0);
  CHECK_THROWS_AS(finite_diff_check([&] { return sum(leaf); }, {leaf}, 1e-5), UsageError);
}

TEST_CASE("activation pin replays recorded sign patterns") {
  const Tensor x = Tensor::from({3}, {-1.0, 2.0, -3.0});
  ActivationPin pin;
  const Tensor first = leaky_relu(x, 0.2);
  pin.rewind();
  const Tensor flipped = leaky_relu(Tensor::from({3}, {1.0, -2.0, -3.0}), 0.2);
  CHECK(flipped[0] == doctest::Approx(0.2));  // still on the negative piece
  CHECK(flipped[1] == -2.0);                  // still on the positive piece
  CHECK(first[2] == doctest::Approx(-0.6));
  CHECK_THROWS_AS((void)leaky_relu(x, 0.2), UsageError);  // no third pattern recorded
}

TEST_CASE("per-op gradients agree with central differences") {
  Rng rng(11);
  const Tensor a = rng.normal_tensor({3, 4}, 1.0, true);
  const Tensor b = rng.normal_tensor({3, 4}, 1.0, true);
  const Tensor m = rng.normal_tensor({4, 2}, 1.0, true);
  const Tensor s = Tensor::scalar(0.8, true);
  const Tensor col = rng.normal_tensor({3, 1}, 1.0, true);
  const Tensor chan = rng.normal_tensor({4}, 1.0, true);
  const Tensor img = rng.normal_tensor({5, 6, 3}, 1.0, true);
  const Tensor dw = rng.normal_tensor({3, 3, 3}, 0.5, true);
  const Tensor cw = rng.normal_tensor({3, 3, 3, 2}, 0.5, true);
  const Tensor cb = rng.normal_tensor({2}, 0.5, true);
  const Tensor pw = rng.normal_tensor({3, 2}, 1.0, true);
  // Keep leaky_relu inputs away from the kink.
  std::vector<Real> away(12);
  for (auto& v : away) v = (rng.uniform(0, 1) < 0.5 ? -1 : 1) * rng.uniform(0.2, 2.0);
  const Tensor kinked = Tensor::from({3, 4}, away, true);
  const Tensor u = rng.normal_tensor({7, 3}, 1.0, true);
  const Tensor decay = rng.uniform_tensor({3}, -0.9, 0.9, true);
  const std::vector<Real> h0 = {0.3, -0.2, 0.5};
  const std::vector<std::size_t> index = {2, 0, 0, 1};

  const std::vector<std::pair<const char*, std::function<Real()>>> cases = {
      {"reshape", [&] { return op_grad_error([&] { return reshape(a, {4, 3}); }, {a}); }},
      {"add", [&] { return op_grad_error([&] { return add(a, b); }, {a, b}); }},
      {"sub", [&] { return op_grad_error([&] { return sub(a, b); }, {a, b}); }},
      {"mul", [&] { return op_grad_error([&] { return mul(a, b); }, {a, b}); }},
      {"scale", [&] { return op_grad_error([&] { return scale(a, -1.7); }, {a}); }},
      {"scale_by", [&] { return op_grad_error([&] { return scale_by(a, s); }, {a, s}); }},
      {"square", [&] { return op_grad_error([&] { return square(a); }, {a}); }},
      {"sum", [&] { return op_grad_error([&] { return sum(a); }, {a}); }},
      {"mean", [&] { return op_grad_error([&] { return mean(a); }, {a}); }},
      {"matmul", [&] { return op_grad_error([&] { return matmul(a, m); }, {a, m}); }},
      {"transpose", [&] { return op_grad_error([&] { return transpose(a); }, {a}); }},
      {"mul_channel", [&] { return op_grad_error([&] { return mul_channel(a, chan); }, {a, chan}); }},
      {"add_channel", [&] { return op_grad_error([&] { return add_channel(a, chan); }, {a, chan}); }},
      {"row_sum", [&] { return op_grad_error([&] { return row_sum(a); }, {a}); }},
      {"row_dot", [&] { return op_grad_error([&] { return row_dot(a, b); }, {a, b}); }},
      {"mul_rows", [&] { return op_grad_error([&] { return mul_rows(a, col); }, {a, col}); }},
      {"repeat_cols", [&] { return op_grad_error([&] { return repeat_cols(col, 5); }, {col}); }},
      {"softmax_rows", [&] { return op_grad_error([&] { return softmax_rows(a); }, {a}); }},
      {"gather_rows", [&] { return op_grad_error([&] { return gather_rows(a, index); }, {a}); }},
      {"silu", [&] { return op_grad_error([&] { return silu(a); }, {a}); }},
      {"sigmoid", [&] { return op_grad_error([&] { return sigmoid(a); }, {a}); }},
      {"tanh", [&] { return op_grad_error([&] { return tanh(a); }, {a}); }},
      {"leaky_relu", [&] { return op_grad_error([&] { return leaky_relu(kinked, 0.2); }, {kinked}); }},
      {"log_sigmoid", [&] { return op_grad_error([&] { return log_sigmoid(a, 1e-7); }, {a}); }},
      {"log_one_minus_sigmoid", [&] { return op_grad_error([&] { return log_one_minus_sigmoid(a, 1e-7); }, {a}); }},
      {"conv2d s1", [&] { return op_grad_error([&] { return conv2d(img, cw, cb, 1, 1); }, {img, cw, cb}); }},
      {"conv2d s2", [&] { return op_grad_error([&] { return conv2d(img, cw, cb, 2, 1); }, {img, cw, cb}); }},
      {"conv2d_depthwise", [&] { return op_grad_error([&] { return conv2d_depthwise(img, dw); }, {img, dw}); }},
      {"conv1x1", [&] { return op_grad_error([&] { return conv1x1(img, pw, cb); }, {img, pw, cb}); }},
      {"global_avg_pool", [&] { return op_grad_error([&] { return global_avg_pool(img); }, {img}); }},
      {"upsample_nearest2x", [&] { return op_grad_error([&] { return upsample_nearest2x(img); }, {img}); }},
      {"avg_pool", [&] { return op_grad_error([&] { return avg_pool(img, 2); }, {img}); }},
      {"diag_scan", [&] { return op_grad_error([&] { return diag_scan(u, decay, h0); }, {u, decay}); }},
  };
  for (const auto& [name, run] : cases) {
    CAPTURE(name);
    CHECK(run() < 1e-6);
  }
}

}  // TEST_SUITE
