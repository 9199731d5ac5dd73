#include <benchmark/benchmark.h>

#include "stymam/ops.hpp"
#include "stymam/rng.hpp"
#include "stymam/ssm.hpp"

using namespace stymam;

namespace {

void run(benchmark::State& state, bool selective, bool naive) {
  const auto steps = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  SSMParams p = SSMParams::random(16, 8, rng);
  p.selective = selective;
  const Tensor x = rng.normal_tensor({steps, 8}, 1.0);
  const SSMState h0 = SSMState::zeros(16);
  NoGradGuard no_grad;
  for (auto _ : state) {
    benchmark::DoNotOptimize(naive ? ssm_scan_naive(x, p, h0) : ssm_scan(x, p, h0));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(steps));
}

}  // namespace

static void BM_SsmScan(benchmark::State& s) { run(s, false, false); }
static void BM_SsmScanSelective(benchmark::State& s) { run(s, true, false); }
static void BM_SsmScanNaive(benchmark::State& s) { run(s, false, true); }
BENCHMARK(BM_SsmScan)->Arg(64)->Arg(1024)->Arg(4096);
BENCHMARK(BM_SsmScanSelective)->Arg(64)->Arg(1024)->Arg(4096);
BENCHMARK(BM_SsmScanNaive)->Arg(64)->Arg(1024)->Arg(4096);

BENCHMARK_MAIN();
