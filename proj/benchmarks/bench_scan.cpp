#include <benchmark/benchmark.h>

#include "stymam/rng.hpp"
#include "stymam/scan.hpp"

using namespace stymam;

static void BM_BuildStripZigzag(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(build_strip_zigzag(n, n, 4, StripOrientation::Horizontal));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}
BENCHMARK(BM_BuildStripZigzag)->Arg(8)->Arg(32)->Arg(128);

static void BM_SerializeRoundTrip(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto order = build_strip_zigzag(n, n, 4, StripOrientation::Vertical);
  Rng rng(1);
  const Tensor x = rng.normal_tensor({n, n, 8}, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(deserialize(serialize(x, order), order));
}
BENCHMARK(BM_SerializeRoundTrip)->Arg(8)->Arg(32)->Arg(128);

BENCHMARK_MAIN();
