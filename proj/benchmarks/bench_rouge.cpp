#include <benchmark/benchmark.h>

#include <random>

#include "narrsum/rouge.hpp"

namespace {

using narrsum::TokenList;

TokenList random_sentence(std::mt19937_64& rng, std::size_t length, int alphabet) {
  std::uniform_int_distribution<int> word(0, alphabet - 1);
  TokenList out(length);
  for (auto& t : out) t = "w" + std::to_string(word(rng));
  return out;
}

std::vector<TokenList> random_summary(std::mt19937_64& rng, std::size_t sentences, std::size_t length) {
  std::vector<TokenList> out;
  for (std::size_t i = 0; i < sentences; ++i) out.push_back(random_sentence(rng, length, 200));
  return out;
}

void BM_LcsLength(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_sentence(rng, n, 50);
  const auto b = random_sentence(rng, n, 50);
  for (auto _ : state) benchmark::DoNotOptimize(narrsum::rouge::lcs_length(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_LcsLength)->RangeMultiplier(2)->Range(16, 256)->Complexity(benchmark::oNSquared);

void BM_RougeLSummary(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const auto sentences = static_cast<std::size_t>(state.range(0));
  const auto cand = random_summary(rng, sentences, 20);
  const auto ref = random_summary(rng, sentences, 20);
  for (auto _ : state) benchmark::DoNotOptimize(narrsum::rouge::rouge_l_summary(cand, ref));
}
BENCHMARK(BM_RougeLSummary)->Arg(5)->Arg(20)->Arg(50);

void BM_RougeSU4(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const auto a = random_sentence(rng, static_cast<std::size_t>(state.range(0)), 200);
  const auto b = random_sentence(rng, static_cast<std::size_t>(state.range(0)), 200);
  for (auto _ : state) benchmark::DoNotOptimize(narrsum::rouge::rouge_su4(a, b));
}
BENCHMARK(BM_RougeSU4)->Arg(100)->Arg(1000);

}  // namespace
