#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include "narrsum/config.hpp"
#include "narrsum/pipeline.hpp"
#include "support/oracles.hpp"

namespace narrsum::pipeline {
namespace {

TokenList numbered(std::size_t n, const std::string& stem = "w") {
  TokenList out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(stem + std::to_string(i));
  return out;
}

Example example(const std::string& id, std::vector<TokenList> doc,
                std::vector<std::vector<TokenList>> summaries) {
  Example ex;
  ex.document.id = id;
  for (auto& s : doc) ex.document.sentences.push_back({std::move(s), {0, 1}});
  ex.summaries.report_id = id;
  for (std::size_t j = 0; j < summaries.size(); ++j) {
    Summary s;
    s.id = id + "_" + std::to_string(j);
    for (auto& t : summaries[j]) s.sentences.push_back({std::move(t), {0, 1}});
    ex.summaries.summaries.push_back(std::move(s));
  }
  return ex;
}

TEST(TruncateToWordLimit, Examples) {
  EXPECT_EQ(truncate_to_word_limit(numbered(1200), 1000), numbered(1000));
  EXPECT_EQ(truncate_to_word_limit(numbered(999), 1000), numbered(999));
  EXPECT_TRUE(truncate_to_word_limit(TokenList{}, 1000).empty());
  EXPECT_THROW(truncate_to_word_limit(numbered(3), 0), std::invalid_argument);
}

TEST(TruncateSentences, CutsAcrossSentencesAndDropsEmpty) {
  const std::vector<TokenList> s = {numbered(4, "a"), numbered(4, "b"), numbered(4, "c")};
  const auto cut = truncate_sentences(s, 6);
  ASSERT_EQ(cut.size(), 2u);
  EXPECT_EQ(cut[0], numbered(4, "a"));
  EXPECT_EQ(cut[1], numbered(2, "b"));
  EXPECT_EQ(truncate_sentences(s, 8).size(), 2u);
  EXPECT_EQ(word_count(truncate_sentences(s, 100)), 12u);
}

TEST(Detokenize, RoundTripThroughParse) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<TokenList> sentences(1 + trial % 5);
    for (auto& s : sentences) s = oracles::random_tokens(rng, 1, 8, 5);
    const std::string text = detokenize(sentences);
    EXPECT_EQ(parse_prediction(text), sentences);
  }
  const std::vector<TokenList> s = {{"profit", "rose"}, {"costs", "fell"}};
  EXPECT_EQ(detokenize(s), "profit rose.\ncosts fell.\n");
}

TEST(ParsePrediction, FreeTextWithSeveralSentencesPerLine) {
  const auto parsed = parse_prediction("Revenue grew 5%. Costs fell!\nOutlook is stable.");
  ASSERT_EQ(parsed.size(), 3u);
  EXPECT_EQ(parsed[0], (TokenList{"revenue", "grew", "5"}));
  EXPECT_EQ(parsed[2], (TokenList{"outlook", "is", "stable"}));
}

Split toy_split() {
  Split s;
  s.name = "testing";
  s.examples.push_back(example("d1", {{"a", "b", "c"}, {"d", "e"}},
                               {{{"a", "b", "c"}}, {{"b", "x"}, {"d"}}}));
  s.examples.push_back(example("d2", {{"p", "q"}, {"r", "s", "t"}}, {{{"q", "p", "r"}}}));
  return s;
}

TEST(EvaluateSystem, IdenticalToFirstReferenceScoresOne) {
  const Split split = toy_split();
  std::map<std::string, std::vector<TokenList>> pred;
  for (const auto& ex : split.examples) {
    for (const auto& s : ex.summaries.summaries[0].sentences) pred[ex.document.id].push_back(s.tokens);
  }
  const auto report = evaluate_system("sys", pred, split);
  for (const auto& cell : report.cells) EXPECT_DOUBLE_EQ(cell.f1, 1.0);
  EXPECT_EQ(report.documents.size(), 2u);
}

TEST(EvaluateSystem, EmptyPredictionsScoreZero) {
  const Split split = toy_split();
  std::map<std::string, std::vector<TokenList>> pred = {{"d1", {}}, {"d2", {}}};
  const auto report = evaluate_system("sys", pred, split);
  for (const auto& cell : report.cells) {
    EXPECT_EQ(cell.precision, 0.0);
    EXPECT_EQ(cell.recall, 0.0);
    EXPECT_EQ(cell.f1, 0.0);
  }
}

/// Max-F1 over references for one variant, computed with the test oracles.
rouge::RougeScore brute_cell(std::size_t variant, const std::vector<TokenList>& cand,
                             const SummarySet& refs) {
  auto flat = [](const std::vector<TokenList>& s) {
    TokenList out;
    for (const auto& t : s) out.insert(out.end(), t.begin(), t.end());
    return out;
  };
  rouge::RougeScore best;
  bool first = true;
  for (const auto& summary : refs.summaries) {
    std::vector<TokenList> ref;
    for (const auto& s : summary.sentences) ref.push_back(s.tokens);
    rouge::RougeScore s;
    switch (variant) {
      case 0: s = oracles::rouge_l_summary(cand, ref); break;
      case 1: s = oracles::rouge_n(flat(cand), flat(ref), 1); break;
      case 2: s = oracles::rouge_n(flat(cand), flat(ref), 2); break;
      default: s = oracles::rouge_su4(flat(cand), flat(ref)); break;
    }
    if (first || s.f1 > best.f1) best = s;
    first = false;
  }
  return best;
}

TEST(EvaluateSystem, ToySetMatchesPerDocumentBruteForce) {
  const Split split = toy_split();
  const std::map<std::string, std::vector<TokenList>> pred = {
      {"d1", {{"b", "c", "x"}, {"d"}}}, {"d2", {{"p", "r", "s"}}}};
  const auto report = evaluate_system("sys", pred, split);
  for (std::size_t v = 0; v < 4; ++v) {
    const auto c1 = brute_cell(v, pred.at("d1"), split.examples[0].summaries);
    const auto c2 = brute_cell(v, pred.at("d2"), split.examples[1].summaries);
    EXPECT_NEAR(report.cells[v].precision, (c1.precision + c2.precision) / 2, 1e-12) << v;
    EXPECT_NEAR(report.cells[v].recall, (c1.recall + c2.recall) / 2, 1e-12) << v;
    EXPECT_NEAR(report.cells[v].f1, (c1.f1 + c2.f1) / 2, 1e-12) << v;
  }
  // Hand check: R-1 on d2 is 2/3 against the single reference.
  EXPECT_NEAR(report.documents[1].cells[1].f1, 2.0 / 3, 1e-12);
}

TEST(EvaluateSystem, MeanAggregationAveragesReferences) {
  const Split split = toy_split();
  const std::map<std::string, std::vector<TokenList>> pred = {{"d1", {{"a", "b", "c"}}}};
  const auto max_report = evaluate_system("sys", pred, split, Aggregation::kMax);
  const auto mean_report = evaluate_system("sys", pred, split, Aggregation::kMean);
  EXPECT_DOUBLE_EQ(max_report.cells[1].f1, 1.0);
  const double other = oracles::rouge_n({"a", "b", "c"}, {"b", "x", "d"}, 1).f1;
  EXPECT_NEAR(mean_report.cells[1].f1, (1.0 + other) / 2, 1e-12);
  EXPECT_EQ(parse_aggregation("mean"), Aggregation::kMean);
  EXPECT_THROW(parse_aggregation("median"), std::invalid_argument);
}

TEST(EvaluateSystem, PredictionWithoutReferencesExcluded) {
  const Split split = toy_split();
  const std::map<std::string, std::vector<TokenList>> pred = {{"d1", {{"a"}}}, {"ghost", {{"a"}}}};
  const auto report = evaluate_system("sys", pred, split);
  EXPECT_EQ(report.excluded, (std::vector<std::string>{"ghost"}));
  EXPECT_EQ(report.documents.size(), 1u);
}

TEST(ReportCsv, TwelveRowsInTableOrder) {
  const Split split = toy_split();
  const std::map<std::string, std::vector<TokenList>> pred = {{"d1", {{"a"}}}};
  const SystemReport reports[] = {evaluate_system("one", pred, split),
                                  evaluate_system("two", pred, split)};
  std::istringstream csv(report_csv(reports));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "metric,one,two");
  std::vector<std::string> labels;
  while (std::getline(csv, line)) labels.push_back(line.substr(0, line.find(',')));
  const std::vector<std::string> expected = {
      "Precision(R-L)", "Recall(R-L)", "F-1(R-L)",   "Precision(R-1)",
      "Recall(R-1)",    "F-1(R-1)",    "Precision(R-2)", "Recall(R-2)",
      "F-1(R-2)",       "Precision(R-SU4)", "Recall(R-SU4)", "F-1(R-SU4)"};
  EXPECT_EQ(labels, expected);
  const std::string text = report_text(reports);
  EXPECT_NE(text.find("F-1(R-SU4)"), std::string::npos);
}

Vocab vocab_for(const Document& doc) {
  std::set<std::string> words;
  for (const auto& s : doc.sentences) words.insert(s.tokens.begin(), s.tokens.end());
  return Vocab(std::vector<std::string>(words.begin(), words.end()));
}

extractor::ExtractorConfig tiny_extractor(std::size_t vocab) {
  extractor::ExtractorConfig c;
  c.vocab_size = vocab;
  c.embedding_dim = 6;
  c.word_hidden = 6;
  c.sentence_hidden = 6;
  c.decoder_hidden = 6;
  c.attention_dim = 6;
  c.init_scale = 0.5;
  return c;
}

TEST(Summarize, RespectsWordLimit) {
  Document doc;
  doc.id = "long";
  for (int i = 0; i < 30; ++i) doc.sentences.push_back({numbered(20, "s" + std::to_string(i) + "_"), {0, 1}});
  const Vocab vocab = vocab_for(doc);
  rl::VocabRewriter rewriter(vocab);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const extractor::Extractor model(tiny_extractor(vocab.size()), seed);
    for (std::size_t limit : {1u, 15u, 50u, 1000u}) {
      const auto summary = summarize(doc, vocab, model, rewriter, limit);
      ASSERT_FALSE(summary.empty());
      EXPECT_LE(word_count(summary), limit);
    }
  }
}

TEST(Summarize, ImmediateStopFallsBackToBestFirstStepSentence) {
  Document doc;
  doc.id = "d";
  doc.sentences = {{{"alpha", "beta"}, {0, 1}}, {{"gamma"}, {0, 1}}, {{"delta", "eps"}, {0, 1}}};
  const Vocab vocab = vocab_for(doc);
  rl::VocabRewriter rewriter(vocab);
  extractor::Extractor model(tiny_extractor(vocab.size()), 3);
  // Make the stop sentinel dominate every sentence key.
  auto& p = model.params();
  for (double& v : p.at("pointer.key_proj").data()) v = 0.01;
  for (double& v : p.at("pointer.query_proj").data()) v = 0.0;
  for (double& v : p.at("pointer.score").data()) v = 1.0;
  for (double& v : p.at("stop_sentinel").data()) v = 100.0;
  const auto ids = encode_document(vocab, doc);
  const auto extraction = model.extract(ids, doc.id);
  ASSERT_TRUE(extraction.indices.empty());
  const auto summary = summarize(doc, vocab, model, rewriter, 1000);
  ASSERT_EQ(summary.size(), 1u);
  EXPECT_EQ(summary[0], doc.sentences[extraction.first_step_best].tokens);
}

TEST(EmitExtraction, DocumentSentencesUnderLimit) {
  Document doc;
  doc.sentences = {{numbered(3, "a"), {0, 1}}, {numbered(3, "b"), {0, 1}}, {numbered(3, "c"), {0, 1}}};
  const std::size_t idx[] = {0, 2};
  const auto out = emit_extraction(doc, idx, 4);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[1], numbered(1, "c"));
}

TEST(TrainingVocab, CoversReportsAndSummaries) {
  Split s = toy_split();
  const Vocab v = training_vocab(s, 100);
  EXPECT_NE(v.id("x"), Vocab::kUnk);
  EXPECT_NE(v.id("t"), Vocab::kUnk);
  EXPECT_EQ(v.id("never"), Vocab::kUnk);
  EXPECT_EQ(training_vocab(s, 2).size(), Vocab::kReserved + 2);
}

TEST(RunConfig, DefaultsAndStrictKeys) {
  const RunConfig c;
  EXPECT_EQ(c.vocab_size, 20000u);
  EXPECT_EQ(c.embedding_dim, 300u);
  EXPECT_EQ(c.max_sentence_tokens, 60u);
  EXPECT_EQ(c.max_extract_sentences, 80u);
  EXPECT_DOUBLE_EQ(c.lr, 0.001);
  EXPECT_DOUBLE_EQ(c.lr_decay, 0.5);
  EXPECT_DOUBLE_EQ(c.clip_norm, 1.0);
  EXPECT_EQ(c.batch_size, 16u);
  EXPECT_EQ(c.checkpoint_every_batches, 16u);
  EXPECT_EQ(c.beam_width, 2u);
  EXPECT_DOUBLE_EQ(c.repetition_penalty, 2.0);
  EXPECT_EQ(c.word_limit, 1000u);

  const auto j = c.to_json();
  const RunConfig back = RunConfig::from_json(j);
  EXPECT_EQ(back.to_json().dump(), j.dump());
  nlohmann::json bad = j;
  bad["batch_sise"] = 8;
  EXPECT_THROW(RunConfig::from_json(bad), DataError);
  bad = j;
  bad["lr"] = "fast";
  EXPECT_THROW(RunConfig::from_json(bad), DataError);
}

}  // namespace
}  // namespace narrsum::pipeline
