#include "stymam/reference.hpp"

#include <algorithm>
#include <cmath>

namespace stymam::reference {

namespace {

Real sigmoid(Real x) { return 1.0 / (1.0 + std::exp(-x)); }
Real clamped_log(Real p) { return std::log(std::max(p, kProbabilityFloor)); }

std::vector<Tensor> features(const Tensor& img, const FeatureExtractor& phi) {
  std::vector<Tensor> out;
  Tensor x = img;
  for (const auto& s : phi.stages()) {
    x = conv2d(x, s.w, s.b, 2, 1);
    std::vector<Real> v(x.data().begin(), x.data().end());
    for (auto& e : v) e = e * sigmoid(e);
    x = Tensor::from(x.shape(), std::move(v));
    out.push_back(x);
  }
  return out;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<Real> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      Real acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      out[i * n + j] = acc;
    }
  return Tensor::from({m, n}, std::move(out));
}

Tensor conv2d_depthwise(const Tensor& x, const Tensor& kernels) {
  const long h = static_cast<long>(x.dim(0)), w = static_cast<long>(x.dim(1));
  const std::size_t c = x.dim(2);
  const long k = static_cast<long>(kernels.dim(0)), r = k / 2;
  std::vector<Real> out(x.numel(), 0.0);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (long y = 0; y < h; ++y)
      for (long xx = 0; xx < w; ++xx) {
        Real acc = 0;
        for (long ky = 0; ky < k; ++ky)
          for (long kx = 0; kx < k; ++kx) {
            const long iy = y + ky - r, ix = xx + kx - r;
            const Real v = (iy < 0 || iy >= h || ix < 0 || ix >= w) ? 0.0 : x[static_cast<std::size_t>(iy * w + ix) * c + ch];
            acc += v * kernels[static_cast<std::size_t>(ky * k + kx) * c + ch];
          }
        out[static_cast<std::size_t>(y * w + xx) * c + ch] = acc;
      }
  return Tensor::from(x.shape(), std::move(out));
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride, std::size_t pad) {
  const long h = static_cast<long>(x.dim(0)), wd = static_cast<long>(x.dim(1));
  const std::size_t cin = x.dim(2), k = w.dim(0), cout = w.dim(3);
  const std::size_t oh = (x.dim(0) + 2 * pad - k) / stride + 1, ow = (x.dim(1) + 2 * pad - k) / stride + 1;
  std::vector<Real> out(oh * ow * cout);
  for (std::size_t co = 0; co < cout; ++co)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        Real acc = bias[co];
        for (std::size_t ky = 0; ky < k; ++ky)
          for (std::size_t kx = 0; kx < k; ++kx)
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
              const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
              if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
              acc += x[(static_cast<std::size_t>(iy * wd + ix)) * cin + ci] * w[((ky * k + kx) * cin + ci) * cout + co];
            }
        out[(oy * ow + ox) * cout + co] = acc;
      }
  return Tensor::from({oh, ow, cout}, std::move(out));
}

Tensor crsa(const Tensor& features, const CRSAWeights& w) {
  const std::size_t h = features.dim(0), wd = features.dim(1), c = features.dim(2), hw = h * wd;
  auto f = [&](std::size_t p, std::size_t ch) { return features[p * c + ch]; };

  std::vector<Real> g(c, 0.0);  // channel map
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t p = 0; p < hw; ++p) g[ch] += f(p, ch);
    g[ch] /= static_cast<Real>(hw);
  }
  std::vector<Real> r(hw * c);  // 1x1 conv
  for (std::size_t p = 0; p < hw; ++p)
    for (std::size_t co = 0; co < c; ++co) {
      Real acc = w.b_r[co];
      for (std::size_t ci = 0; ci < c; ++ci) acc += f(p, ci) * w.w_r[ci * c + co];
      r[p * c + co] = acc;
    }
  std::vector<Real> g1(hw * c);  // reweighting
  for (std::size_t p = 0; p < hw; ++p)
    for (std::size_t ch = 0; ch < c; ++ch) g1[p * c + ch] = r[p * c + ch] * g[ch];
  std::vector<Real> attn(hw * hw);  // spatial attention
  for (std::size_t p = 0; p < hw; ++p)
    for (std::size_t q = 0; q < hw; ++q) {
      Real acc = 0;
      for (std::size_t ch = 0; ch < c; ++ch) acc += r[p * c + ch] * g1[q * c + ch];
      attn[p * hw + q] = acc / static_cast<Real>(hw * c);
    }
  std::vector<Real> out(hw * c);
  for (std::size_t p = 0; p < hw; ++p)
    for (std::size_t ch = 0; ch < c; ++ch) {
      Real acc = 0;
      for (std::size_t q = 0; q < hw; ++q) acc += attn[p * hw + q] * f(q, ch);
      out[p * c + ch] = acc;
    }
  return Tensor::from({h, wd, c}, std::move(out));
}

Real content_loss(const Tensor& content, const Tensor& stylized, const FeatureExtractor& phi) {
  const auto a = features(content, phi);
  const auto b = features(stylized, phi);
  Real total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    Real sq = 0;
    for (std::size_t j = 0; j < a[i].numel(); ++j) sq += (a[i][j] - b[i][j]) * (a[i][j] - b[i][j]);
    total += sq / static_cast<Real>(a[i].numel());
  }
  return total;
}

Real adv_loss_discriminator(const std::vector<Tensor>& real_logits, const std::vector<Tensor>& fake_logits) {
  Real total = 0;
  for (std::size_t m = 0; m < real_logits.size(); ++m) {
    Real real_term = 0, fake_term = 0;
    for (Real v : real_logits[m].data()) real_term += clamped_log(sigmoid(v));
    for (Real v : fake_logits[m].data()) fake_term += clamped_log(1.0 - sigmoid(v));
    total += real_term / static_cast<Real>(real_logits[m].numel()) + fake_term / static_cast<Real>(fake_logits[m].numel());
  }
  return -total / static_cast<Real>(real_logits.size());
}

Real adv_loss_generator(const std::vector<Tensor>& fake_logits, GeneratorLossMode mode) {
  Real total = 0;
  for (const auto& f : fake_logits) {
    Real term = 0;
    for (Real v : f.data()) term += mode == GeneratorLossMode::Saturating ? clamped_log(1.0 - sigmoid(v)) : clamped_log(sigmoid(v));
    total += term / static_cast<Real>(f.numel());
  }
  total /= static_cast<Real>(fake_logits.size());
  return mode == GeneratorLossMode::Saturating ? total : -total;
}

}  // namespace stymam::reference
