#include "stymam/generator.hpp"

#include <cmath>

#include "stymam/errors.hpp"
#include "stymam/ops.hpp"

namespace stymam {

std::vector<Tensor> tensors_of(const ParamList& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.tensor);
  return out;
}

GeneratorConfig GeneratorConfig::desk() { return {}; }

GeneratorConfig GeneratorConfig::paper() {
  GeneratorConfig c;
  c.channels = 64;
  c.state_dim = 16;
  c.num_rdsmb = 4;
  c.dsmb_per_rdsmb = 2;
  return c;
}

void GeneratorConfig::validate() const {
  if (channels == 0 || state_dim == 0 || num_rdsmb == 0 || dsmb_per_rdsmb == 0 || strip_size == 0) {
    throw ConfigError("generator config: channels, state_dim, num_rdsmb, dsmb_per_rdsmb and strip_size must be positive");
  }
  if (!(alpha_init > 0)) throw ConfigError("generator config: alpha_init must be positive");
}

void BranchWeights::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".lin_in.w", lin_in_w});
  out.push_back({prefix + ".lin_in.b", lin_in_b});
  out.push_back({prefix + ".dwconv", dw_kernels});
  out.push_back({prefix + ".ssm.a_raw", ssm.a_raw});
  out.push_back({prefix + ".ssm.b", ssm.b});
  out.push_back({prefix + ".ssm.c", ssm.c_out});
  out.push_back({prefix + ".ssm.d", ssm.d});
  if (ssm.selective) {
    out.push_back({prefix + ".ssm.w_b", ssm.w_b});
    out.push_back({prefix + ".ssm.w_c", ssm.w_c});
  }
  out.push_back({prefix + ".lin_out.w", lin_out_w});
  out.push_back({prefix + ".lin_out.b", lin_out_b});
  out.push_back({prefix + ".loe.kernels", loe_kernels});
  out.push_back({prefix + ".loe.scale", loe_scale});
}

void DSMBWeights::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".alpha", alpha});
  horizontal.collect(prefix + ".h", out);
  vertical.collect(prefix + ".v", out);
}

namespace {

Tensor normal(Rng& rng, Shape shape, std::size_t fan_in) {
  return rng.normal_tensor(std::move(shape), 1.0 / std::sqrt(static_cast<Real>(fan_in)), true);
}

Tensor zero_param(Shape shape) { return Tensor::zeros(std::move(shape), true); }

BranchWeights init_branch(const GeneratorConfig& cfg, Rng& rng) {
  const std::size_t c = cfg.channels, n = cfg.state_dim;
  BranchWeights b;
  b.lin_in_w = normal(rng, {c, c}, c);
  b.lin_in_b = zero_param({c});
  b.dw_kernels = normal(rng, {3, 3, c}, 9);
  b.ssm.state_dim = n;
  b.ssm.channels = c;
  b.ssm.selective = cfg.selective;
  b.ssm.a_raw = rng.uniform_tensor({n}, 0.5, 2.0, true);
  b.ssm.b = normal(rng, {n, c}, c);
  b.ssm.c_out = normal(rng, {c, n}, n);
  b.ssm.d = Tensor::full({c}, 1.0, true);
  b.ssm.w_b = rng.normal_tensor({n, c}, 0.5 / std::sqrt(static_cast<Real>(c)), true);
  b.ssm.w_c = rng.normal_tensor({n, c}, 0.5 / std::sqrt(static_cast<Real>(c)), true);
  b.lin_out_w = normal(rng, {c, c}, c);
  b.lin_out_b = zero_param({c});
  b.loe_kernels = normal(rng, {3, 3, c}, 9);
  b.loe_scale = Tensor::full({c}, 0.1, true);
  return b;
}

BranchWeights zero_branch(const GeneratorConfig& cfg) {
  const std::size_t c = cfg.channels, n = cfg.state_dim;
  BranchWeights b;
  b.lin_in_w = zero_param({c, c});
  b.lin_in_b = zero_param({c});
  b.dw_kernels = zero_param({3, 3, c});
  b.ssm = SSMParams::zeros(n, c, true);
  b.ssm.selective = cfg.selective;
  b.lin_out_w = zero_param({c, c});
  b.lin_out_b = zero_param({c});
  b.loe_kernels = zero_param({3, 3, c});
  b.loe_scale = zero_param({c});
  return b;
}

void fill_zero(Tensor& t) {
  for (auto& v : t.mutable_data()) v = 0.0;
}

}  // namespace

GeneratorWeights GeneratorWeights::init(const GeneratorConfig& config, Rng& rng) {
  config.validate();
  const std::size_t c = config.channels;
  GeneratorWeights w;
  w.config = config;
  w.embed.conv1_w = normal(rng, {3, 3, 3, c}, 27);
  w.embed.conv1_b = zero_param({c});
  w.embed.conv2_w = normal(rng, {3, 3, c, c}, 9 * c);
  w.embed.conv2_b = zero_param({c});
  for (std::size_t g = 0; g < config.num_rdsmb; ++g) {
    RDSMBWeights group;
    for (std::size_t k = 0; k < config.dsmb_per_rdsmb; ++k) {
      DSMBWeights d;
      d.horizontal = init_branch(config, rng);
      d.vertical = init_branch(config, rng);
      d.alpha = Tensor::scalar(config.alpha_init, true);
      group.blocks.push_back(std::move(d));
    }
    w.groups.push_back(std::move(group));
  }
  w.crsa.w_r = normal(rng, {c, c}, c);
  w.crsa.b_r = zero_param({c});
  w.decoder.up1_w = normal(rng, {3, 3, c, c}, 9 * c);
  w.decoder.up1_b = zero_param({c});
  w.decoder.up2_w = normal(rng, {3, 3, c, c}, 9 * c);
  w.decoder.up2_b = zero_param({c});
  w.decoder.out_w = normal(rng, {c, 3}, c);
  w.decoder.out_b = zero_param({3});
  return w;
}

GeneratorWeights GeneratorWeights::zeros(const GeneratorConfig& config) {
  config.validate();
  const std::size_t c = config.channels;
  GeneratorWeights w;
  w.config = config;
  w.embed = {zero_param({3, 3, 3, c}), zero_param({c}), zero_param({3, 3, c, c}), zero_param({c})};
  for (std::size_t g = 0; g < config.num_rdsmb; ++g) {
    RDSMBWeights group;
    for (std::size_t k = 0; k < config.dsmb_per_rdsmb; ++k) {
      group.blocks.push_back({zero_branch(config), zero_branch(config), Tensor::scalar(0.0, true)});
    }
    w.groups.push_back(std::move(group));
  }
  w.crsa = {zero_param({c, c}), zero_param({c})};
  w.decoder = {zero_param({3, 3, c, c}), zero_param({c}), zero_param({3, 3, c, c}), zero_param({c}), zero_param({c, 3}), zero_param({3})};
  return w;
}

ParamList GeneratorWeights::params() const {
  ParamList out;
  out.push_back({"gen.embed.conv1.w", embed.conv1_w});
  out.push_back({"gen.embed.conv1.b", embed.conv1_b});
  out.push_back({"gen.embed.conv2.w", embed.conv2_w});
  out.push_back({"gen.embed.conv2.b", embed.conv2_b});
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (std::size_t k = 0; k < groups[g].blocks.size(); ++k) {
      groups[g].blocks[k].collect("gen.rdsmb" + std::to_string(g) + ".dsmb" + std::to_string(k), out);
    }
  }
  out.push_back({"gen.crsa.w_r", crsa.w_r});
  out.push_back({"gen.crsa.b_r", crsa.b_r});
  out.push_back({"gen.decoder.up1.w", decoder.up1_w});
  out.push_back({"gen.decoder.up1.b", decoder.up1_b});
  out.push_back({"gen.decoder.up2.w", decoder.up2_w});
  out.push_back({"gen.decoder.up2.b", decoder.up2_b});
  out.push_back({"gen.decoder.out.w", decoder.out_w});
  out.push_back({"gen.decoder.out.b", decoder.out_b});
  return out;
}

void zero_pipelines(DSMBWeights& w) {
  for (BranchWeights* b : {&w.horizontal, &w.vertical}) {
    for (Tensor* t : {&b->lin_in_w, &b->lin_in_b, &b->dw_kernels, &b->ssm.a_raw, &b->ssm.b, &b->ssm.c_out,
                      &b->ssm.d, &b->ssm.w_b, &b->ssm.w_c, &b->lin_out_w, &b->lin_out_b, &b->loe_kernels,
                      &b->loe_scale}) {
      fill_zero(*t);
    }
  }
}

Tensor patch_embed(const Tensor& img, const EmbedWeights& w) {
  if (img.rank() != 3 || img.dim(2) != 3) throw DimensionError("patch_embed: expected [H x W x 3], got " + shape_str(img.shape()));
  if (img.dim(0) % 4 != 0 || img.dim(1) % 4 != 0) {
    throw DimensionError("patch_embed: extents " + shape_str(img.shape()) + " must be multiples of 4");
  }
  const Tensor x = silu(conv2d(img, w.conv1_w, w.conv1_b, 2, 1));
  return conv2d(x, w.conv2_w, w.conv2_b, 2, 1);
}

Tensor branch_pipeline(const Tensor& features, const BranchWeights& w, const ScanOrder& order) {
  // Pointwise stages commute with the scan permutation, so only the SSM runs on the sequence.
  Tensor x = conv1x1(features, w.lin_in_w, w.lin_in_b);
  x = silu(conv2d_depthwise(x, w.dw_kernels));
  Tensor y = deserialize(ssm_scan(serialize(x, order), w.ssm), order);
  y = conv1x1(y, w.lin_out_w, w.lin_out_b);
  return add(y, mul_channel(conv2d_depthwise(y, w.loe_kernels), w.loe_scale));
}

Tensor dsmb_forward(const Tensor& features, const DSMBWeights& w, const DualPath& paths) {
  if (features.rank() != 3 || features.dim(0) != paths.horizontal.height() || features.dim(1) != paths.horizontal.width()) {
    throw DimensionError("dsmb_forward: features " + shape_str(features.shape()) + " do not match scan paths " +
                         std::to_string(paths.horizontal.height()) + "x" + std::to_string(paths.horizontal.width()));
  }
  const Tensor h = add(features, scale_by(branch_pipeline(features, w.horizontal, paths.horizontal), w.alpha));
  const Tensor v = add(features, scale_by(branch_pipeline(features, w.vertical, paths.vertical), w.alpha));
  return scale(add(h, v), 0.5);
}

Tensor rdsmb_forward(const Tensor& features, const RDSMBWeights& w, const DualPath& paths) {
  Tensor x = features;
  for (const auto& block : w.blocks) x = dsmb_forward(x, block, paths);
  return add(features, x);
}

Tensor crsa_forward(const Tensor& features, const CRSAWeights& w, bool softmax) {
  if (features.rank() != 3) throw DimensionError("crsa_forward: expected [h x w x C], got " + shape_str(features.shape()));
  const std::size_t h = features.dim(0), wd = features.dim(1), c = features.dim(2);
  const std::size_t sites = h * wd;
  const Tensor g = global_avg_pool(features);
  const Tensor r = conv1x1(features, w.w_r, w.b_r);
  const Tensor g1 = mul_channel(r, g);
  const Tensor r_flat = reshape(r, {sites, c});
  const Tensor g1_flat = reshape(g1, {sites, c});
  Tensor attn = scale(matmul(r_flat, transpose(g1_flat)), 1.0 / static_cast<Real>(sites * c));
  if (softmax) attn = softmax_rows(attn);
  return reshape(matmul(attn, reshape(features, {sites, c})), {h, wd, c});
}

Tensor decode(const Tensor& features, const DecoderWeights& w) {
  Tensor x = silu(conv2d(upsample_nearest2x(features), w.up1_w, w.up1_b, 1, 1));
  x = silu(conv2d(upsample_nearest2x(x), w.up2_w, w.up2_b, 1, 1));
  return tanh(conv1x1(x, w.out_w, w.out_b));
}

Tensor generator_forward(const Tensor& img, const GeneratorWeights& w, const DualPath& paths) {
  Tensor f = patch_embed(img, w.embed);
  for (const auto& group : w.groups) f = rdsmb_forward(f, group, paths);
  return decode(crsa_forward(f, w.crsa, w.config.crsa_softmax), w.decoder);
}

Tensor generator_forward(const Tensor& img, const GeneratorWeights& w) {
  if (img.rank() != 3 || img.dim(0) % 4 != 0 || img.dim(1) % 4 != 0) {
    throw DimensionError("generator_forward: image " + shape_str(img.shape()) + " must be [H x W x 3] with H, W multiples of 4");
  }
  return generator_forward(img, w, DualPath::build(img.dim(0) / 4, img.dim(1) / 4, w.config.strip_size));
}

}  // namespace stymam
