#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "punc/conceptworld.hpp"

namespace cw = punc::conceptworld;

namespace {

cw::ConceptWorld make_world(std::size_t n) {
  std::vector<std::string> vocab;
  for (std::size_t i = 0; i < n; ++i) vocab.push_back("c" + std::to_string(i));
  cw::WorldParams params;
  params.seed = 5;
  params.aleatoric_rate = 0.01;
  return cw::ConceptWorld(vocab, vocab, params);
}

void BM_GenerateConcepts(benchmark::State& state) {
  const auto world = make_world(static_cast<std::size_t>(state.range(0)));
  const cw::ConceptSet prompt{"c1", "c2", "c3"};
  std::uint64_t nonce = 0;
  for (auto _ : state) benchmark::DoNotOptimize(cw::generate_concepts(prompt, world, nonce++));
}
BENCHMARK(BM_GenerateConcepts)->Arg(100)->Arg(1000);

void BM_ExtractAndRender(benchmark::State& state) {
  const auto world = make_world(1000);
  const std::string text = "a photo of c1 and c17 next to c512 near c999";
  for (auto _ : state) {
    const auto concepts = world.extract(text);
    benchmark::DoNotOptimize(cw::render_pseudo_image(concepts, world));
  }
}
BENCHMARK(BM_ExtractAndRender);

}  // namespace
