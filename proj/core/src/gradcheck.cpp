#include "stymam/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "stymam/errors.hpp"
#include "stymam/ops.hpp"

namespace stymam {

Real finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, Real eps) {
  Tensor leaf = x.clone(true);
  return finite_diff_check([&] { return f(leaf); }, {leaf}, eps).max_rel_error;
}

GradCheckReport finite_diff_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params, Real eps,
                                  std::size_t max_coords_per_tensor, std::uint64_t seed) {
  for (const auto& p : params) {
    if (!p.requires_grad()) throw UsageError("finite_diff_check: parameters must be grad-tracked leaves");
  }
  for (auto p : params) p.zero_grad();
  ActivationPin pin;
  backward(f());
  pin.rewind();

  std::vector<std::vector<Real>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) {
    auto g = p.grad();
    analytic.emplace_back(g.empty() ? std::vector<Real>(p.numel(), 0.0) : std::vector<Real>(g.begin(), g.end()));
  }

  std::mt19937_64 rng(seed);
  GradCheckReport report;
  NoGradGuard no_grad;
  for (std::size_t ti = 0; ti < params.size(); ++ti) {
    Tensor p = params[ti];
    std::vector<std::size_t> coords(p.numel());
    std::iota(coords.begin(), coords.end(), 0);
    if (max_coords_per_tensor > 0 && coords.size() > max_coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(max_coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    auto data = p.mutable_data();
    for (std::size_t i : coords) {
      const Real saved = data[i];
      data[i] = saved + eps;
      const Real fp = f().item();
      pin.rewind();
      data[i] = saved - eps;
      const Real fm = f().item();
      pin.rewind();
      data[i] = saved;
      const Real numeric = (fp - fm) / (2 * eps);
      const Real a = analytic[ti][i];
      const Real rel = std::abs(a - numeric) / (std::abs(a) + std::abs(numeric) + 1e-12);
      ++report.coords_checked;
      if (rel > report.max_rel_error || report.worst.empty()) {
        report.max_rel_error = std::max(report.max_rel_error, rel);
        if (rel >= report.max_rel_error) report.worst = std::to_string(ti) + "[" + std::to_string(i) + "]";
      }
    }
  }
  for (auto p : params) p.zero_grad();
  return report;
}

}  // namespace stymam
