#include <benchmark/benchmark.h>

#include "lrurec/lru.hpp"
#include "lrurec/model.hpp"

using namespace lrurec;

namespace {

Tensor3 random_input(int n, int l, int h, Rng& rng) {
  Tensor3 x(n, l, h);
  for (auto& v : x.data) v = rng.normal();
  return x;
}

void bm_scan_parallel(benchmark::State& state) {
  int l = static_cast<int>(state.range(0));
  int h = 32, hr = 64, n = 4;
  Rng rng(1);
  LruParams p = init_lru(h, hr, 0.8, 0.99, 6.283185307179586, rng);
  Tensor3 x = random_input(n, l, h, rng);
  PadMask mask(n, l);
  for (auto _ : state) {
    ScanResult s = lru_forward_parallel(x, mask, p);
    benchmark::DoNotOptimize(s.y.data.data());
  }
  state.SetComplexityN(l);
}

void bm_scan_sequential(benchmark::State& state) {
  int l = static_cast<int>(state.range(0));
  int h = 32, hr = 64, n = 4;
  Rng rng(1);
  LruParams p = init_lru(h, hr, 0.8, 0.99, 6.283185307179586, rng);
  Tensor3 x = random_input(n, l, h, rng);
  PadMask mask(n, l);
  for (auto _ : state) {
    LruForward f = lru_forward_sequential(x, mask, p);
    benchmark::DoNotOptimize(f.y.data.data());
  }
  state.SetComplexityN(l);
}

void bm_incremental_step(benchmark::State& state) {
  int history = static_cast<int>(state.range(0));
  ModelConfig cfg;
  cfg.item_count = 1000;
  cfg.h = 64;
  cfg.dropout = 0.0;
  Rng rng(2);
  ModelParams p = init_model(cfg, rng);
  SessionState s = fresh_session(p);
  std::vector<double> scores;
  Rng items(3);
  for (int k = 0; k < history; ++k)
    model_step_scores(p, s, 1 + static_cast<int>(items.below(1000)), scores);
  for (auto _ : state) {
    model_step_scores(p, s, 1 + static_cast<int>(items.below(1000)), scores);
    benchmark::DoNotOptimize(scores.data());
  }
}

void bm_backward(benchmark::State& state) {
  int l = static_cast<int>(state.range(0));
  ModelConfig cfg;
  cfg.item_count = 200;
  cfg.h = 32;
  cfg.dropout = 0.0;
  Rng rng(4);
  ModelParams p = init_model(cfg, rng);
  IdMatrix ids(4, l), targets(4, l);
  PadMask mask(4, l);
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < l; ++k) {
      ids.at(i, k) = 1 + static_cast<int>(rng.below(200));
      targets.at(i, k) = 1 + static_cast<int>(rng.below(200));
    }
  for (auto _ : state) {
    LossResult r = model_backward(p, ids, targets, mask);
    benchmark::DoNotOptimize(r.loss);
  }
}

}  // namespace

BENCHMARK(bm_scan_parallel)->RangeMultiplier(4)->Range(8, 2048)->Complexity();
BENCHMARK(bm_scan_sequential)->RangeMultiplier(4)->Range(8, 2048)->Complexity();
BENCHMARK(bm_incremental_step)->Arg(10)->Arg(100)->Arg(1000);
BENCHMARK(bm_backward)->Arg(16)->Arg(64);

BENCHMARK_MAIN();
