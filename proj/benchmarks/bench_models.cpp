#include <benchmark/benchmark.h>

#include <random>

#include "narrsum/abstractor.hpp"
#include "narrsum/autodiff.hpp"
#include "narrsum/extractor.hpp"

namespace {

using namespace narrsum;

void BM_LstmStep(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  ad::ParameterSet params;
  const auto lstm = ad::add_lstm(params, "cell", dim, dim);
  std::mt19937_64 rng(1);
  params.init_uniform(rng, 0.1);
  const std::vector<double> x(dim, 0.5);
  for (auto _ : state) {
    ad::Graph g;
    const auto s = ad::lstm_cell(g, ad::bind(g, lstm), g.column(x), ad::lstm_zero_state(g, dim));
    benchmark::DoNotOptimize(g.value(s.h).data());
  }
}
BENCHMARK(BM_LstmStep)->Arg(32)->Arg(128);

void BM_LstmStepBackward(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  ad::ParameterSet params;
  const auto lstm = ad::add_lstm(params, "cell", dim, dim);
  std::mt19937_64 rng(1);
  params.init_uniform(rng, 0.1);
  const std::vector<double> x(dim, 0.5);
  for (auto _ : state) {
    ad::Graph g;
    const auto s = ad::lstm_cell(g, ad::bind(g, lstm), g.column(x), ad::lstm_zero_state(g, dim));
    g.backward(g.sum(s.h));
  }
}
BENCHMARK(BM_LstmStepBackward)->Arg(32)->Arg(128);

extractor::IdDocument random_doc(std::size_t sentences, std::size_t length, int vocab) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> tok(4, vocab - 1);
  extractor::IdDocument doc(sentences, std::vector<int>(length));
  for (auto& s : doc) {
    for (int& t : s) t = tok(rng);
  }
  return doc;
}

void BM_ExtractGreedy(benchmark::State& state) {
  extractor::ExtractorConfig config;
  config.vocab_size = 1000;
  config.embedding_dim = 32;
  config.word_hidden = 32;
  config.sentence_hidden = 32;
  config.decoder_hidden = 32;
  config.attention_dim = 32;
  const extractor::Extractor model(config, 3);
  const auto doc = random_doc(static_cast<std::size_t>(state.range(0)), 15, 1000);
  for (auto _ : state) benchmark::DoNotOptimize(model.extract(doc).indices.size());
}
BENCHMARK(BM_ExtractGreedy)->Arg(30)->Arg(120)->Unit(benchmark::kMillisecond);

void BM_ParaphraseBeam2(benchmark::State& state) {
  abstractor::AbstractorConfig config;
  config.vocab_size = 2000;
  config.embedding_dim = 32;
  config.hidden = 32;
  config.attention_dim = 32;
  const abstractor::Abstractor model(config, 4);
  const auto source = random_doc(1, 15, 2000)[0];
  const abstractor::DecodeConfig decode{.max_output_tokens = 20};
  for (auto _ : state) benchmark::DoNotOptimize(model.paraphrase(source, decode).size());
}
BENCHMARK(BM_ParaphraseBeam2)->Unit(benchmark::kMillisecond);

}  // namespace
