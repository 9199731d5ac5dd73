#pragma once

// Property and oracle checks shared by `stymam selftest` and the acceptance
// suite. Each check returns a named pass/fail record instead of throwing.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "stymam/generator.hpp"
#include "stymam/ssm.hpp"

namespace stymam {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0;
};

using SsmScanFn = std::function<Tensor(const Tensor&, const SSMParams&, const SSMState&)>;

// Hand-enumerated 4x4, s=2 horizontal order.
inline const std::vector<std::size_t> kStrip4x4Fixture = {0, 4, 5, 1, 2, 6, 7, 3, 11, 15, 14, 10, 9, 13, 12, 8};

// Bijectivity, within-strip Manhattan-1 steps and cross-strip continuity for
// every H, W in [1, max_extent], s in [1, max_strip] and both orientations.
CheckResult check_scan_invariants(std::size_t max_extent = 12, std::size_t max_strip = 4);
CheckResult check_scan_fixture();
CheckResult check_scan_roundtrip(std::uint64_t seed = 7);

// `scan` against ssm_scan_naive on random shapes (steps <= 64, C <= 8, N <= 16).
CheckResult check_ssm_oracle(std::size_t cases = 200, bool selective = false, std::uint64_t seed = 11,
                             const SsmScanFn& scan = {});

CheckResult check_crsa_oracle(std::size_t cases = 50, std::uint64_t seed = 13);
CheckResult check_loss_identities();
CheckResult check_residual_identity(std::uint64_t seed = 17);

// Finite-difference agreement (eps 1e-5) for DSMB, RDSMB, CRSA, the
// discriminator, each loss, and the end-to-end desk objective.
// `end_to_end` selects the generator used for the full-objective check.
std::vector<CheckResult> check_gradients(std::uint64_t seed = 19, const GeneratorConfig& end_to_end = GeneratorConfig::desk());

struct SelftestOptions {
  // Perturbs the SSM under test so the oracle check must fail.
  bool mutate_ssm = false;
  bool gradients = true;
};

std::vector<CheckResult> run_selftest(const SelftestOptions& options = {});

// One line per check plus a summary; returns true iff all passed.
bool print_report(std::ostream& os, const std::vector<CheckResult>& results);

}  // namespace stymam
