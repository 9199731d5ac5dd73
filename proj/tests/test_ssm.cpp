#include "doctest.h"

#include <cmath>

#include "stymam/errors.hpp"
#include "stymam/gradcheck.hpp"
#include "stymam/ops.hpp"
#include "stymam/rng.hpp"
#include "stymam/ssm.hpp"
#include "support/helpers.hpp"

using namespace stymam;
using stymam::test::bitwise_equal;
using stymam::test::max_abs_diff;

namespace {

void set(Tensor& t, std::vector<Real> values) {
  auto d = t.mutable_data();
  REQUIRE(d.size() == values.size());
  std::copy(values.begin(), values.end(), d.begin());
}

Tensor identity(std::size_t n) {
  std::vector<Real> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return Tensor::from({n, n}, v);
}

}  // namespace

TEST_SUITE("ssm") {

TEST_CASE("zero transition with identity maps passes the input through the state") {
  SSMParams p = SSMParams::zeros(3, 3);
  p.b = identity(3);
  p.c_out = identity(3);
  Rng rng(1);
  const Tensor x = rng.normal_tensor({10, 3}, 1.0);
  CHECK(bitwise_equal(ssm_scan(x, p), x));
  CHECK(bitwise_equal(ssm_scan_naive(x, p, SSMState::zeros(3)), x));
}

TEST_CASE("skip-only path") {
  SSMParams p = SSMParams::zeros(4, 2);
  p.d = Tensor::full({2}, 1.0);
  Rng rng(2);
  const Tensor x = rng.normal_tensor({7, 2}, 1.0);
  CHECK(bitwise_equal(ssm_scan(x, p), x));
}

TEST_CASE("scalar single step by hand") {
  SSMParams p = SSMParams::zeros(1, 1);
  set(p.a_raw, {0.5});
  set(p.b, {2.0});
  set(p.c_out, {-1.5});
  set(p.d, {0.25});
  const Real a = std::tanh(0.5), h0 = 0.4, x = 1.2;
  const Real expect = -1.5 * (a * h0 + 2.0 * x) + 0.25 * x;
  const Tensor seq = Tensor::from({1, 1}, {x});
  CHECK(ssm_scan_naive(seq, p, SSMState{{h0}})[0] == doctest::Approx(expect).epsilon(1e-15));
  CHECK(ssm_scan(seq, p, SSMState{{h0}})[0] == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("zero input and zero state give zero output") {
  Rng rng(3);
  const SSMParams p = SSMParams::random(5, 3, rng);
  const Tensor y = ssm_scan_naive(Tensor::zeros({12, 3}), p, SSMState::zeros(5));
  for (Real v : y.data()) CHECK(v == 0.0);
}

TEST_CASE("scan matches the naive recurrence") {
  Rng rng(4);
  const SSMParams fixed = SSMParams::random(8, 4, rng);
  const Tensor x = rng.normal_tensor({16, 4}, 1.0);
  CHECK(max_abs_diff(ssm_scan(x, fixed), ssm_scan_naive(x, fixed, SSMState::zeros(8))) < 1e-12);

  for (int i = 0; i < 200; ++i) {
    const std::size_t steps = 1 + rng.index(64), c = 1 + rng.index(8), n = 1 + rng.index(16);
    SSMParams p = SSMParams::random(n, c, rng);
    p.selective = i % 2 == 1;
    const Tensor seq = rng.normal_tensor({steps, c}, 1.0);
    SSMState h0{std::vector<Real>(n)};
    for (auto& v : h0.h) v = rng.normal();
    CAPTURE(i);
    CHECK(max_abs_diff(ssm_scan(seq, p, h0), ssm_scan_naive(seq, p, h0)) < 1e-12);
  }
}

TEST_CASE("transition stays inside the unit interval") {
  SSMParams p = SSMParams::zeros(3, 1);
  set(p.a_raw, {-50.0, 0.0, 50.0});
  for (Real a : p.transition()) CHECK(std::abs(a) <= 1.0);
  Rng rng(5);
  const SSMParams r = SSMParams::random(16, 4, rng);
  for (Real a : r.transition()) CHECK(std::abs(a) < 1.0);
}

TEST_CASE("long constant input stays within the geometric bound") {
  Rng rng(6);
  SSMParams p = SSMParams::random(4, 4, rng);
  p.c_out = identity(4);  // output = state
  p.d = Tensor::zeros({4});
  const Tensor x = Tensor::full({4096, 4}, 0.9);
  const Tensor y = ssm_scan(x, p);
  Real b_inf = 0, a_max = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    Real row = 0;
    for (std::size_t j = 0; j < 4; ++j) row += std::abs(p.b[i * 4 + j]);
    b_inf = std::max(b_inf, row);
  }
  for (Real a : p.transition()) a_max = std::max(a_max, std::abs(a));
  const Real bound = b_inf * 0.9 / (1 - a_max);
  for (Real v : y.data()) {
    REQUIRE(std::isfinite(v));
    REQUIRE(std::abs(v) <= bound * (1 + 1e-12));
  }
}

TEST_CASE("linear in the input when selection is off") {
  Rng rng(7);
  const SSMParams p = SSMParams::random(6, 3, rng);
  const Tensor x = rng.normal_tensor({20, 3}, 1.0);
  const Tensor z = rng.normal_tensor({20, 3}, 1.0);
  const Real a = 1.7, b = -0.6;
  const Tensor lhs = ssm_scan(add(scale(x, a), scale(z, b)), p);
  const Tensor rhs = add(scale(ssm_scan(x, p), a), scale(ssm_scan(z, p), b));
  CHECK(max_abs_diff(lhs, rhs) < 1e-10);
}

TEST_CASE("selective parameters") {
  const Tensor w_b = Tensor::from({2, 3}, {1, 0, 0, 0, 1, 1});
  const Tensor w_c = Tensor::from({2, 3}, {0, 2, 0, 1, 0, 0});
  const std::vector<Real> x = {1.0, 2.0, 3.0};
  const auto s = selective_params(x, w_b, w_c);
  // B_t rows are constant: (W_B x) = [1, 5]; C_t columns are constant: (W_C x) = [4, 1].
  CHECK(s.b == std::vector<Real>{1, 1, 1, 5, 5, 5});
  CHECK(s.c == std::vector<Real>{4, 1, 4, 1, 4, 1});
  CHECK_THROWS_AS(selective_params(std::vector<Real>{1.0}, w_b, w_c), DimensionError);
}

TEST_CASE("zero selection weights leave only decay and skip") {
  Rng rng(8);
  SSMParams p = SSMParams::random(5, 3, rng);
  p.selective = true;
  p.w_b = Tensor::zeros({5, 3});
  p.w_c = Tensor::zeros({5, 3});
  const Tensor x = rng.normal_tensor({9, 3}, 1.0);
  const SSMState h0{{0.5, -0.5, 1.0, 0.0, 2.0}};
  CHECK(bitwise_equal(ssm_scan(x, p, h0), mul_channel(x, p.d)));
}

TEST_CASE("selection flag off ignores selection weights") {
  Rng rng(9);
  SSMParams p = SSMParams::random(4, 2, rng);
  const Tensor x = rng.normal_tensor({11, 2}, 1.0);
  const Tensor before = ssm_scan(x, p);
  p.w_b = rng.normal_tensor({4, 2}, 3.0);
  p.w_c = rng.normal_tensor({4, 2}, 3.0);
  CHECK(bitwise_equal(ssm_scan(x, p), before));
}

TEST_CASE("channel and state mismatches are dimension errors") {
  Rng rng(10);
  const SSMParams p = SSMParams::random(4, 3, rng);
  CHECK_THROWS_AS(ssm_scan(Tensor::zeros({5, 2}), p), DimensionError);
  CHECK_THROWS_AS(ssm_scan(Tensor::zeros({5, 3}), p, SSMState::zeros(3)), DimensionError);
  CHECK_THROWS_AS(ssm_scan_naive(Tensor::zeros({5, 2}), p, SSMState::zeros(4)), DimensionError);
}

TEST_CASE("gradients with respect to every parameter and the sequence") {
  for (bool selective : {false, true}) {
    CAPTURE(selective);
    Rng rng(11);
    SSMParams p = SSMParams::random(3, 2, rng, true);
    p.selective = selective;
    const Tensor x = rng.normal_tensor({8, 2}, 1.0, true);
    const Tensor w = rng.normal_tensor({8, 2}, 1.0);
    const SSMState h0{{0.2, -0.1, 0.3}};
    auto params = p.tensors();
    params.push_back(x);
    const auto report = finite_diff_check([&] { return sum(mul(ssm_scan(x, p, h0), w)); }, params, 1e-5);
    CHECK(report.max_rel_error < 1e-5);
  }
}

}  // TEST_SUITE
