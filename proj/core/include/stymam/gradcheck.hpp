#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stymam/tensor.hpp"

namespace stymam {

struct GradCheckReport {
  Real max_rel_error = 0;
  std::size_t coords_checked = 0;
  std::string worst;  // "<tensor #>[<flat index>]" of the worst coordinate
};

// Compares reverse-mode gradients of a scalar f against central differences.
// Per coordinate: |analytic - numeric| / (|analytic| + |numeric| + 1e-12).
Real finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, Real eps);

// Multi-tensor form. `f` re-evaluates the objective from the current values of
// `params` (grad-tracked leaves). With max_coords_per_tensor > 0 only a seeded
// random subset of each tensor's coordinates is perturbed. Leaky-ReLU sign
// patterns are pinned to those of the unperturbed pass (see ActivationPin).
GradCheckReport finite_diff_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params, Real eps,
                                  std::size_t max_coords_per_tensor = 0, std::uint64_t seed = 0);

}  // namespace stymam
