#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "punc/detect_metrics.hpp"

namespace {

std::vector<double> draw(std::mt19937_64& rng, std::size_t n, double shift) {
  std::vector<double> v(n);
  for (auto& x : v) x = static_cast<double>(rng() % 1000) / 1000.0 + shift;
  return v;
}

void BM_EvaluateDetection(benchmark::State& state) {
  std::mt19937_64 rng(7);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto pos = draw(rng, n, 0.2);
  const auto neg = draw(rng, n, 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(punc::detect::evaluate_detection(pos, neg));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 2);
}
BENCHMARK(BM_EvaluateDetection)->Arg(100)->Arg(10000)->Arg(1000000);

}  // namespace
