#include <benchmark/benchmark.h>

#include "lulcseg/ops.hpp"
#include "lulcseg/rng.hpp"

using namespace lulcseg;

namespace {

Tensor random_f32(Shape shape, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Tensor t = Tensor::zeros(shape);
  for (i64 i = 0; i < t.numel(); ++i) t.set_value_at(i, rng.normal());
  return t;
}

}  // namespace

static void BM_Matmul(benchmark::State& state) {
  i64 n = state.range(0);
  Tensor a = random_f32({n, n}, 1);
  Tensor b = random_f32({n, n}, 2);
  NoGradGuard no_grad;
  for (auto _ : state) {
    Tensor c = matmul(a, b);
    benchmark::DoNotOptimize(c.f32());
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128)->Arg(256);

static void BM_Conv2dStage1(benchmark::State& state) {
  i64 s = state.range(0);
  Tensor x = random_f32({1, 12, s, s}, 3);
  Tensor w = random_f32({16, 12, 7, 7}, 4);
  Tensor b = random_f32({16}, 5);
  NoGradGuard no_grad;
  for (auto _ : state) {
    Tensor y = conv2d(x, w, b, 4, 3, 1);
    benchmark::DoNotOptimize(y.f32());
  }
}
BENCHMARK(BM_Conv2dStage1)->Arg(32)->Arg(64);

static void BM_Softmax(benchmark::State& state) {
  Tensor x = random_f32({64, 256}, 6);
  NoGradGuard no_grad;
  for (auto _ : state) {
    Tensor y = softmax(x, 1);
    benchmark::DoNotOptimize(y.f32());
  }
}
BENCHMARK(BM_Softmax);

static void BM_BilinearUpsample(benchmark::State& state) {
  Tensor x = random_f32({1, 64, 8, 8}, 7);
  NoGradGuard no_grad;
  for (auto _ : state) {
    Tensor y = bilinear_upsample(x, 32, 32);
    benchmark::DoNotOptimize(y.f32());
  }
}
BENCHMARK(BM_BilinearUpsample);
