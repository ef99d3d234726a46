#include <benchmark/benchmark.h>

#include "lulcseg/loss.hpp"
#include "lulcseg/network.hpp"
#include "lulcseg/rng.hpp"

using namespace lulcseg;

namespace {

Tensor random_f32(Shape shape, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Tensor t = Tensor::zeros(shape);
  for (i64 i = 0; i < t.numel(); ++i) t.set_value_at(i, rng.uniform(0, 1));
  return t;
}

}  // namespace

static void BM_DeskForward(benchmark::State& state) {
  i64 s = state.range(0);
  NetConfig cfg = NetConfig::desk();
  Network net(cfg, DType::f32, 1);
  Tensor spectral = random_f32({1, cfg.in_spectral, s, s}, 2);
  Tensor sar = random_f32({1, cfg.in_sar, s, s}, 3);
  NoGradGuard no_grad;
  for (auto _ : state) {
    Tensor logits = net.forward(spectral, sar);
    benchmark::DoNotOptimize(logits.f32());
  }
}
BENCHMARK(BM_DeskForward)->Arg(32)->Arg(64);

static void BM_DeskTrainStep(benchmark::State& state) {
  i64 s = state.range(0);
  NetConfig cfg = NetConfig::desk();
  Network net(cfg, DType::f32, 1);
  Tensor spectral = random_f32({4, cfg.in_spectral, s, s}, 2);
  Tensor sar = random_f32({4, cfg.in_sar, s, s}, 3);
  Labels labels({4, s / 4, s / 4});
  SplitMix64 rng(4);
  for (auto& l : labels.data) l = static_cast<std::uint8_t>(rng.uniform_int(9));
  FocalConfig focal;
  for (auto _ : state) {
    net.params().zero_grad();
    Tensor logits = net.forward(spectral, sar);
    Tensor loss = focal_loss(logits, labels, focal);
    backward(loss);
    benchmark::DoNotOptimize(loss.scalar_value());
  }
}
BENCHMARK(BM_DeskTrainStep)->Arg(32);

BENCHMARK_MAIN();
