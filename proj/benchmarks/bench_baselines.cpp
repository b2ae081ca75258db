#include <benchmark/benchmark.h>

#include <random>

#include "narrsum/baselines.hpp"

namespace {

std::vector<narrsum::TokenList> random_doc(std::size_t sentences) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> word(0, 299);
  std::uniform_int_distribution<std::size_t> length(5, 25);
  std::vector<narrsum::TokenList> doc(sentences);
  for (auto& s : doc) {
    s.resize(length(rng));
    for (auto& t : s) t = "w" + std::to_string(word(rng));
  }
  return doc;
}

void BM_Pagerank(benchmark::State& state) {
  const auto graph = narrsum::baselines::textrank_graph(random_doc(static_cast<std::size_t>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(narrsum::baselines::pagerank(graph).data());
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Pagerank)->RangeMultiplier(2)->Range(32, 512)->Complexity(benchmark::oNSquared);

void BM_Textrank(benchmark::State& state) {
  const auto doc = random_doc(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(narrsum::baselines::textrank(doc).size());
}
BENCHMARK(BM_Textrank)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_Lexrank(benchmark::State& state) {
  const auto doc = random_doc(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(narrsum::baselines::lexrank(doc).size());
}
BENCHMARK(BM_Lexrank)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

}  // namespace
