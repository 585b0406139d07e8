#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "punc/textsim.hpp"

namespace ts = punc::textsim;

namespace {

ts::TokenSequence random_tokens(std::mt19937_64& rng, std::size_t n, std::size_t alphabet) {
  std::vector<std::string> t(n);
  for (auto& s : t) s = "w" + std::to_string(rng() % alphabet);
  return ts::TokenSequence(std::move(t));
}

ts::EmbeddingMatrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t dim) {
  std::vector<std::vector<double>> m(rows, std::vector<double>(dim));
  for (auto& r : m)
    for (auto& v : r) v = static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;
  return ts::EmbeddingMatrix::from_rows(std::move(m));
}

void BM_Tokenize(benchmark::State& state) {
  std::string text;
  for (int i = 0; i < state.range(0); ++i) text += "A photo, of the \"red\" car! ";
  for (auto _ : state) benchmark::DoNotOptimize(ts::tokenize(text));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_Tokenize)->Arg(1)->Arg(16)->Arg(256);

void BM_RougeN(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto a = random_tokens(rng, static_cast<std::size_t>(state.range(0)), 50);
  const auto b = random_tokens(rng, static_cast<std::size_t>(state.range(0)), 50);
  for (auto _ : state) benchmark::DoNotOptimize(ts::rouge_n(a, b, 2));
}
BENCHMARK(BM_RougeN)->Arg(16)->Arg(77)->Arg(512);

void BM_RougeL(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const auto a = random_tokens(rng, static_cast<std::size_t>(state.range(0)), 50);
  const auto b = random_tokens(rng, static_cast<std::size_t>(state.range(0)), 50);
  for (auto _ : state) benchmark::DoNotOptimize(ts::rouge_l(a, b));
}
BENCHMARK(BM_RougeL)->Arg(16)->Arg(77)->Arg(512);

void BM_BertScore(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(rng, n, 768);
  const auto b = random_matrix(rng, n, 768);
  for (auto _ : state) benchmark::DoNotOptimize(ts::bertscore(a, b));
}
BENCHMARK(BM_BertScore)->Arg(16)->Arg(77);

}  // namespace
