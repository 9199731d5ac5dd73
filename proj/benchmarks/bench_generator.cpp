#include <benchmark/benchmark.h>

#include "stymam/generator.hpp"
#include "stymam/ops.hpp"

using namespace stymam;

static void BM_GeneratorForward(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  const auto w = GeneratorWeights::init(GeneratorConfig::desk(), rng);
  const Tensor img = rng.uniform_tensor({size, size, 3}, -1, 1);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(generator_forward(img, w));
}
BENCHMARK(BM_GeneratorForward)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_GeneratorForwardBackward(benchmark::State& state) {
  Rng rng(4);
  const auto w = GeneratorWeights::init(GeneratorConfig::desk(), rng);
  const Tensor img = rng.uniform_tensor({32, 32, 3}, -1, 1);
  for (auto _ : state) backward(sum(generator_forward(img, w)));
}
BENCHMARK(BM_GeneratorForwardBackward)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
