#include "doctest.h"

#include <cmath>
#include <set>

#include "stymam/errors.hpp"
#include "stymam/gradcheck.hpp"
#include "stymam/generator.hpp"
#include "stymam/losses.hpp"
#include "stymam/ops.hpp"
#include "stymam/reference.hpp"
#include "support/helpers.hpp"

using namespace stymam;
using stymam::test::bitwise_equal;
using stymam::test::max_abs_diff;

namespace {

GeneratorConfig tiny(std::size_t channels = 4, std::size_t state = 3) {
  GeneratorConfig c;
  c.channels = channels;
  c.state_dim = state;
  c.strip_size = 2;
  return c;
}

// A DSMB with output-side weights drawn at unit-ish scale, so every tensor
// gets a gradient well above round-off.
DSMBWeights random_block(std::size_t channels, std::size_t state, Rng& rng) {
  GeneratorConfig c = tiny(channels, state);
  c.dsmb_per_rdsmb = 1;
  GeneratorWeights w = GeneratorWeights::init(c, rng);
  DSMBWeights d = w.groups[0].blocks[0];
  for (auto* b : {&d.horizontal, &d.vertical}) {
    b->lin_out_w = rng.normal_tensor(b->lin_out_w.shape(), 0.5, true);
    b->lin_out_b = rng.normal_tensor(b->lin_out_b.shape(), 0.2, true);
    b->loe_scale = rng.normal_tensor(b->loe_scale.shape(), 0.5, true);
  }
  d.alpha = Tensor::scalar(0.7, true);
  return d;
}

}  // namespace

TEST_SUITE("generator") {

TEST_CASE("config validation") {
  GeneratorConfig c = GeneratorConfig::desk();
  CHECK_NOTHROW(c.validate());
  c.channels = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = GeneratorConfig::desk();
  c.alpha_init = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);

  const auto desk = GeneratorConfig::desk();
  CHECK(desk.channels == 8);
  CHECK(desk.state_dim == 4);
  CHECK(desk.num_rdsmb == 1);
  CHECK(desk.dsmb_per_rdsmb == 2);
  const auto paper = GeneratorConfig::paper();
  CHECK(paper.channels == 64);
  CHECK(paper.state_dim == 16);
  CHECK(paper.num_rdsmb == 4);
  CHECK(paper.dsmb_per_rdsmb == 2);
}

TEST_CASE("parameter names are unique and alpha starts positive") {
  Rng rng(1);
  const auto w = GeneratorWeights::init(GeneratorConfig::desk(), rng);
  const auto params = w.params();
  std::set<std::string> names;
  for (const auto& p : params) {
    CHECK(names.insert(p.name).second);
    CHECK(p.tensor.requires_grad());
  }
  CHECK(names.count("gen.rdsmb0.dsmb1.h.ssm.a_raw") == 1);
  CHECK(names.count("gen.crsa.w_r") == 1);
  for (const auto& block : w.groups[0].blocks) CHECK(block.alpha.item() == doctest::Approx(0.1));
}

TEST_CASE("patch embedding") {
  Rng rng(2);
  const auto w = GeneratorWeights::init(GeneratorConfig::desk(), rng);
  CHECK(patch_embed(Tensor::zeros({32, 32, 3}), w.embed).shape() == Shape{8, 8, 8});
  // Biases start at zero, so a zero image embeds to zero.
  for (const Tensor out = patch_embed(Tensor::zeros({16, 16, 3}), w.embed); Real v : out.data()) CHECK(v == 0.0);
  CHECK_THROWS_AS(patch_embed(Tensor::zeros({30, 32, 3}), w.embed), DimensionError);

  const Tensor img = rng.uniform_tensor({8, 8, 3}, -1, 1, true);
  const Tensor probe = rng.normal_tensor({2, 2, 8}, 1.0);
  const auto e = w.embed;
  const auto report = finite_diff_check([&] { return sum(mul(patch_embed(img, e), probe)); },
                                        {img, e.conv1_w, e.conv1_b, e.conv2_w, e.conv2_b}, 1e-5);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("DSMB is the mean of two alpha-scaled residual branches") {
  Rng rng(3);
  const DSMBWeights d = random_block(4, 3, rng);
  const auto paths = DualPath::build(6, 6, 2);
  const Tensor f = rng.normal_tensor({6, 6, 4}, 1.0);
  const Tensor ph = branch_pipeline(f, d.horizontal, paths.horizontal);
  const Tensor pv = branch_pipeline(f, d.vertical, paths.vertical);
  const Real a = d.alpha.item();
  const Tensor expect = scale(add(add(f, scale(ph, a)), add(f, scale(pv, a))), 0.5);
  CHECK(max_abs_diff(dsmb_forward(f, d, paths), expect) < 1e-12);
}

TEST_CASE("DSMB residual identities") {
  Rng rng(4);
  const auto paths = DualPath::build(8, 8, 4);
  const Tensor f = rng.normal_tensor({8, 8, 4}, 1.0);

  DSMBWeights zeroed = random_block(4, 3, rng);
  zero_pipelines(zeroed);
  CHECK(bitwise_equal(dsmb_forward(f, zeroed, paths), f));

  DSMBWeights no_alpha = random_block(4, 3, rng);
  no_alpha.alpha = Tensor::scalar(0.0, true);
  CHECK(bitwise_equal(dsmb_forward(f, no_alpha, paths), f));

  CHECK_THROWS_AS(dsmb_forward(rng.normal_tensor({6, 8, 4}, 1.0), zeroed, paths), DimensionError);
}

TEST_CASE("DSMB gradient check") {
  Rng rng(5);
  const DSMBWeights d = random_block(4, 3, rng);
  const auto paths = DualPath::build(8, 8, 4);
  const Tensor f = rng.normal_tensor({8, 8, 4}, 1.0, true);
  const Tensor w = rng.normal_tensor({8, 8, 4}, 1.0);
  ParamList pl;
  d.collect("d", pl);
  auto params = tensors_of(pl);
  params.push_back(f);
  const auto report = finite_diff_check([&] { return sum(mul(dsmb_forward(f, d, paths), w)); }, params, 1e-5);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("RDSMB") {
  Rng rng(6);
  const auto paths = DualPath::build(6, 6, 2);
  const Tensor f = rng.normal_tensor({6, 6, 4}, 1.0, true);

  DSMBWeights z = random_block(4, 3, rng);
  zero_pipelines(z);
  const Tensor twice = rdsmb_forward(f, RDSMBWeights{{z, z}}, paths);
  for (std::size_t i = 0; i < f.numel(); ++i) CHECK(twice[i] == 2 * f[i]);

  const DSMBWeights one = random_block(4, 3, rng);
  CHECK(bitwise_equal(rdsmb_forward(f, RDSMBWeights{{one}}, paths), add(f, dsmb_forward(f, one, paths))));

  const RDSMBWeights g{{random_block(4, 3, rng), random_block(4, 3, rng)}};
  const Tensor w = rng.normal_tensor({6, 6, 4}, 1.0);
  ParamList pl;
  g.blocks[0].collect("a", pl);
  g.blocks[1].collect("b", pl);
  auto params = tensors_of(pl);
  params.push_back(f);
  const auto report = finite_diff_check([&] { return sum(mul(rdsmb_forward(f, g, paths), w)); }, params, 1e-5);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("CRSA matches the loop oracle") {
  Rng rng(7);
  for (int i = 0; i < 10; ++i) {
    const std::size_t h = 1 + rng.index(6), w = 1 + rng.index(6), c = 1 + rng.index(4);
    const CRSAWeights cw{rng.normal_tensor({c, c}, 1.0), rng.normal_tensor({c}, 0.5)};
    const Tensor f = rng.normal_tensor({h, w, c}, 1.0);
    CHECK(max_abs_diff(crsa_forward(f, cw), reference::crsa(f, cw)) < 1e-12);
  }
}

TEST_CASE("CRSA closed form at 1x1") {
  const Tensor f = Tensor::from({1, 1, 3}, {0.5, -1.0, 2.0});
  const CRSAWeights cw{Tensor::from({3, 3}, {1, 0, 2, 0, 1, 0, -1, 0, 1}), Tensor::from({3}, {0.1, 0.2, 0.3})};
  // R = f W + b; G = f; G1 = R * G; A = <R, G1> / C.
  const std::vector<Real> r = {0.5 * 1 + 2.0 * -1 + 0.1, -1.0 + 0.2, 0.5 * 2 + 2.0 * 1 + 0.3};
  Real a = 0;
  for (std::size_t k = 0; k < 3; ++k) a += r[k] * r[k] * f[k];
  a /= 3;
  const Tensor out = crsa_forward(f, cw);
  for (std::size_t k = 0; k < 3; ++k) CHECK(out[k] == doctest::Approx(a * f[k]).epsilon(1e-15));
}

TEST_CASE("CRSA of zero features is zero") {
  Rng rng(8);
  const CRSAWeights cw{rng.normal_tensor({3, 3}, 1.0), rng.normal_tensor({3}, 1.0)};
  for (const Tensor out = crsa_forward(Tensor::zeros({4, 5, 3}), cw); Real v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("CRSA output is homogeneous of degree four with a zero bias") {
  // G, R and F each scale with the input, so G1 ~ l^2, A ~ l^3 and out ~ l^4.
  Rng rng(9);
  const CRSAWeights cw{rng.normal_tensor({3, 3}, 1.0), Tensor::zeros({3})};
  const Tensor f = rng.normal_tensor({4, 4, 3}, 1.0);
  const Tensor out = crsa_forward(f, cw);
  const Tensor out2 = crsa_forward(scale(f, 2.0), cw);
  Real peak = 0;
  for (Real v : out.data()) peak = std::max(peak, std::abs(16 * v));
  CHECK(max_abs_diff(out2, scale(out, 16.0)) <= 1e-10 * peak);
  // ...and not of the degree-three form.
  CHECK(max_abs_diff(out2, scale(out, 8.0)) > 1e-3 * peak);
}

TEST_CASE("CRSA softmax variant normalises attention rows") {
  Rng rng(10);
  const CRSAWeights cw{rng.normal_tensor({2, 2}, 1.0), rng.normal_tensor({2}, 1.0)};
  // With constant features every output site is a convex combination of equal rows.
  const Tensor f = Tensor::full({3, 3, 2}, 1.5);
  for (const Tensor out = crsa_forward(f, cw, true); Real v : out.data()) CHECK(v == doctest::Approx(1.5));
}

TEST_CASE("CRSA gradient check") {
  Rng rng(11);
  for (bool softmax : {false, true}) {
    const CRSAWeights cw{rng.normal_tensor({3, 3}, 1.0, true), rng.normal_tensor({3}, 0.5, true)};
    const Tensor f = rng.normal_tensor({4, 4, 3}, 1.0, true);
    const Tensor w = rng.normal_tensor({4, 4, 3}, 1.0);
    const auto report =
        finite_diff_check([&] { return sum(mul(crsa_forward(f, cw, softmax), w)); }, {cw.w_r, cw.b_r, f}, 1e-5);
    CAPTURE(softmax);
    CHECK(report.max_rel_error < 1e-4);
  }
}

TEST_CASE("decoder") {
  Rng rng(12);
  const auto w = GeneratorWeights::init(tiny(), rng);
  const Tensor f = rng.normal_tensor({8, 8, 4}, 3.0);
  const Tensor img = decode(f, w.decoder);
  CHECK(img.shape() == Shape{32, 32, 3});
  for (Real v : img.data()) CHECK(std::abs(v) <= 1.0);

  const Tensor small = rng.normal_tensor({2, 3, 4}, 1.0, true);
  const Tensor probe = rng.normal_tensor({8, 12, 3}, 1.0);
  const auto& d = w.decoder;
  const auto report = finite_diff_check([&] { return sum(mul(decode(small, d), probe)); },
                                        {small, d.up1_w, d.up1_b, d.up2_w, d.up2_b, d.out_w, d.out_b}, 1e-5);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("generator preserves spatial extents") {
  Rng rng(13);
  const auto w = GeneratorWeights::init(GeneratorConfig::desk(), rng);
  for (std::size_t s : {32, 48, 64}) {
    const Tensor img = rng.uniform_tensor({s, s, 3}, -1, 1);
    NoGradGuard g;
    CHECK(generator_forward(img, w).shape() == Shape{s, s, 3});
  }
  CHECK(generator_forward(Tensor::zeros({32, 48, 3}), w).shape() == Shape{32, 48, 3});
  CHECK_THROWS_AS(generator_forward(Tensor::zeros({30, 32, 3}), w), DimensionError);
}

TEST_CASE("generator is deterministic") {
  Rng r1(14), r2(14);
  const auto w1 = GeneratorWeights::init(GeneratorConfig::desk(), r1);
  const auto w2 = GeneratorWeights::init(GeneratorConfig::desk(), r2);
  const Tensor img = test::synthetic_image(32, 3);
  CHECK(bitwise_equal(generator_forward(img, w1), generator_forward(img, w2)));
  CHECK(bitwise_equal(generator_forward(img, w1), generator_forward(img, w1)));
}

TEST_CASE("zero-weight generator outputs mid-grey") {
  const auto w = GeneratorWeights::zeros(GeneratorConfig::desk());
  for (const Tensor out = generator_forward(test::synthetic_image(32, 1), w); Real v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("the scan order is actually consumed") {
  Rng rng(15);
  auto w = GeneratorWeights::init(GeneratorConfig::desk(), rng);
  // Push the CRSA projection up so the RDSMB signal is visible at the output.
  for (auto& v : w.crsa.w_r.mutable_data()) v *= 10;
  const Tensor img = test::synthetic_image(32, 2);
  const Tensor strip = generator_forward(img, w, DualPath::build(8, 8, 4));
  const Tensor raster = generator_forward(img, w, DualPath{ScanOrder::raster(8, 8), ScanOrder::raster(8, 8)});
  CHECK(max_abs_diff(strip, raster) > 1e-6);
}

TEST_CASE("end-to-end content gradient on one embedding weight") {
  Rng rng(16);
  const auto w = GeneratorWeights::init(GeneratorConfig::desk(), rng);
  const auto phi = FeatureExtractor::seeded(5);
  const Tensor content = test::synthetic_image(32, 4);
  const auto report = finite_diff_check([&] { return content_loss(content, generator_forward(content, w), phi); },
                                        {w.embed.conv1_w}, 1e-5, 6, 1);
  CHECK(report.max_rel_error < 1e-3);
}

TEST_CASE("selective generator runs and differs from the static one") {
  Rng r1(17), r2(17);
  GeneratorConfig sel = GeneratorConfig::desk();
  sel.selective = true;
  auto ws = GeneratorWeights::init(sel, r1);
  auto wp = GeneratorWeights::init(GeneratorConfig::desk(), r2);
  for (auto* w : {&ws, &wp}) {
    for (auto& v : w->crsa.w_r.mutable_data()) v *= 10;
  }
  const Tensor img = test::synthetic_image(32, 5);
  const Tensor a = generator_forward(img, ws);
  for (Real v : a.data()) CHECK(std::isfinite(v));
  CHECK(max_abs_diff(a, generator_forward(img, wp)) > 1e-9);
}

}  // TEST_SUITE
