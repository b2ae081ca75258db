#include <gtest/gtest.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <string>

#include "narrsum/corpus.hpp"
#include "narrsum/synthgen.hpp"
#include "support/synth_fixture.hpp"

namespace narrsum {
namespace {

namespace fs = std::filesystem;

void write(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream(path) << text;
}

void make_split_dirs(const fs::path& root) {
  for (const char* split : {"training", "validation", "testing"}) {
    fs::create_directories(root / split / "annual_reports");
    fs::create_directories(root / split / "gold_summaries");
  }
}

TEST(SplitSentences, EmptyInput) {
  EXPECT_TRUE(split_sentences("").empty());
  EXPECT_TRUE(split_sentences("  \n\t ").empty());
}

TEST(SplitSentences, BoundaryRule) {
  EXPECT_EQ(split_sentences("Profit rose. Costs fell."),
            (std::vector<std::string>{"Profit rose.", "Costs fell."}));
}

TEST(SplitSentences, AbbreviationSuppressesBoundary) {
  EXPECT_EQ(split_sentences("Mr. Smith resigned. He left."),
            (std::vector<std::string>{"Mr. Smith resigned.", "He left."}));
}

TEST(SplitSentences, LowercaseContinuationIsNotABoundary) {
  EXPECT_EQ(split_sentences("Sales were 4.5 million. next year too."),
            (std::vector<std::string>{"Sales were 4.5 million. next year too."}));
}

TEST(SplitSentences, DigitStartsNewSentence) {
  EXPECT_EQ(split_sentences("Revenue rose! 2020 was strong? Yes."),
            (std::vector<std::string>{"Revenue rose!", "2020 was strong?", "Yes."}));
}

TEST(SplitSentences, EveryAbbreviationSuppresses) {
  for (const char* abbrev : {"Mr.", "Mrs.", "Dr.", "St.", "No.", "Fig.", "e.g.", "i.e.", "etc."}) {
    const std::string text = std::string("See ") + abbrev + " Five here. Next one.";
    const auto parts = split_sentences(text);
    ASSERT_EQ(parts.size(), 2u) << abbrev;
    EXPECT_EQ(parts[0], std::string("See ") + abbrev + " Five here.");
  }
}

TEST(SplitSentences, SpansCoverNonWhitespaceContent) {
  std::mt19937_64 rng(3);
  const std::vector<std::string> pieces = {"Alpha", "beta.", "Mr.", "Gamma!", "7", "delta?",
                                           "e.g.", "Omega", "\n", "  "};
  std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    for (int i = 0; i < 15; ++i) text += pieces[pick(rng)] + " ";
    std::string joined, original;
    for (const auto& s : split_sentences(text)) {
      EXPECT_FALSE(s.empty());
      for (char c : s) {
        if (!std::isspace(static_cast<unsigned char>(c))) joined += c;
      }
    }
    for (char c : text) {
      if (!std::isspace(static_cast<unsigned char>(c))) original += c;
    }
    EXPECT_EQ(joined, original) << text;
  }
}

TEST(SplitSentences, NoSpanEndsAtSuppressedAbbreviation) {
  const std::string text = "Dr. Who arrived. The No. Two plan e.g. Alpha works. Fine.";
  for (const auto& s : split_sentences(text)) {
    for (const char* abbrev : {"Dr.", "No.", "e.g."}) {
      const std::string a(abbrev);
      EXPECT_FALSE(s.size() >= a.size() && s.compare(s.size() - a.size(), a.size(), a) == 0) << s;
    }
  }
}

TEST(TokenizeWords, Examples) {
  EXPECT_EQ(tokenize_words("Profit rose 4.5%!"), (TokenList{"profit", "rose", "4", "5"}));
  EXPECT_TRUE(tokenize_words("").empty());
}

TEST(TokenizeWords, TruncatesToSixtyTokens) {
  std::string text;
  for (int i = 0; i < 100; ++i) text += "w" + std::to_string(i) + " ";
  const auto tokens = tokenize_words(text);
  ASSERT_EQ(tokens.size(), 60u);
  EXPECT_EQ(tokens.front(), "w0");
  EXPECT_EQ(tokens.back(), "w59");
}

TEST(TokenizeWords, CaseInvariant) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> ch(32, 126);
  for (int trial = 0; trial < 200; ++trial) {
    std::string text(40, ' ');
    for (char& c : text) c = static_cast<char>(ch(rng));
    std::string upper = text, lower = text;
    for (char& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    EXPECT_EQ(tokenize_words(upper), tokenize_words(lower));
    for (const auto& t : tokenize_words(text)) {
      EXPECT_FALSE(t.empty());
      EXPECT_TRUE(std::none_of(t.begin(), t.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); }));
    }
  }
}

TEST(ParseText, SentencesHaveTokensAndSpans) {
  const std::string text = "First one here. ... Second, indeed.";
  const auto sentences = parse_text(text);
  for (const auto& s : sentences) {
    EXPECT_FALSE(s.tokens.empty());
    EXPECT_LE(s.tokens.size(), kMaxSentenceTokens);
    EXPECT_LT(s.char_span.start, s.char_span.end);
  }
}

Document doc_of(std::vector<TokenList> sentences) {
  Document d;
  d.id = "d";
  for (auto& t : sentences) d.sentences.push_back({std::move(t), {0, 1}});
  return d;
}

TEST(BuildVocab, ReservedIdsPlusTokens) {
  const std::vector<Document> docs = {doc_of({{"a", "b"}, {"c", "a"}})};
  const Vocab v = build_vocab(docs);
  EXPECT_EQ(v.size(), 7u);
  EXPECT_EQ(v.id("a"), Vocab::kReserved);  // most frequent
  EXPECT_EQ(v.id("zzz"), Vocab::kUnk);
}

TEST(BuildVocab, CapAtMaxSize) {
  TokenList many;
  for (int i = 0; i < 25000; ++i) many.push_back("t" + std::to_string(i));
  const std::vector<Document> docs = {doc_of({many})};
  EXPECT_EQ(build_vocab(docs, 20000).size(), 20004u);
}

TEST(BuildVocab, FrequencyTiesBrokenLexicographically) {
  const std::vector<Document> docs = {doc_of({{"pear", "apple", "fig", "fig"}})};
  const Vocab v = build_vocab(docs);
  EXPECT_EQ(v.id("fig"), 4);
  EXPECT_EQ(v.id("apple"), 5);
  EXPECT_EQ(v.id("pear"), 6);
}

TEST(BuildVocab, Bijection) {
  const std::vector<Document> docs = {doc_of({{"x", "y", "z", "x"}, {"w"}})};
  const Vocab v = build_vocab(docs);
  for (int id = 0; id < static_cast<int>(v.size()); ++id) EXPECT_EQ(v.id(v.token(id)), id);
  const TokenList t = {"x", "w", "z"};
  EXPECT_EQ(v.decode(v.encode(t)), t);
}

TEST(BuildVocab, RankedTokensRoundTrip) {
  const std::vector<Document> docs = {doc_of({{"b", "a", "b"}})};
  const Vocab v = build_vocab(docs);
  const Vocab restored(v.ranked_tokens());
  EXPECT_EQ(restored.ranked_tokens(), v.ranked_tokens());
  EXPECT_EQ(restored.id("a"), v.id("a"));
}

TEST(LoadDataset, MiniatureTree) {
  fixture::TempDir dir("corpus_tree");
  const fs::path root = dir.path();
  make_split_dirs(root);
  write(root / "training/annual_reports/r1.txt", "Profit rose. Costs fell.");
  write(root / "training/annual_reports/r2.txt", "Sales grew strongly.");
  write(root / "training/gold_summaries/r1_1.txt", "Profit rose.");
  write(root / "training/gold_summaries/r1_2.txt", "Costs fell.");
  write(root / "training/gold_summaries/r2_1.txt", "Sales grew.");
  write(root / "testing/annual_reports/t1.txt", "Nothing to see here.");

  LoadDiagnostics diag;
  const Dataset d = load_dataset(root, &diag);
  ASSERT_EQ(d.training.examples.size(), 2u);
  EXPECT_EQ(d.training.examples[0].summaries.summaries.size(), 2u);
  EXPECT_EQ(d.training.examples[1].summaries.summaries.size(), 1u);
  EXPECT_EQ(d.training.summary_count(), 3u);
  EXPECT_EQ(d.training.examples[0].document.sentences.size(), 2u);

  ASSERT_EQ(d.testing.examples.size(), 1u);
  EXPECT_TRUE(d.testing.examples[0].summaries.summaries.empty());
  EXPECT_TRUE(diag.warnings.empty());

  const auto manifest = nlohmann::json::parse(manifest_json(d));
  EXPECT_EQ(manifest["training"]["reports"], 2);
  EXPECT_EQ(manifest["training"]["summaries"], 3);
  EXPECT_EQ(manifest["testing"]["summaries"], 0);
}

TEST(LoadDataset, TrainingReportWithoutSummaryExcluded) {
  fixture::TempDir dir("corpus_nosum");
  make_split_dirs(dir.path());
  write(dir.path() / "training/annual_reports/r1.txt", "One sentence.");
  LoadDiagnostics diag;
  const Dataset d = load_dataset(dir.path(), &diag);
  EXPECT_TRUE(d.training.examples.empty());
  ASSERT_EQ(diag.warnings.size(), 1u);
  EXPECT_NE(diag.warnings[0].find("r1"), std::string::npos);
}

TEST(LoadDataset, MissingDirectoryIsDataError) {
  fixture::TempDir dir("corpus_missing");
  EXPECT_THROW(load_dataset(dir.path() / "nope"), DataError);
  fs::create_directories(dir.path() / "training" / "annual_reports");
  EXPECT_THROW(load_dataset(dir.path()), DataError);
}

TEST(LoadDataset, SynthCorpusRoundTrip) {
  synthgen::SynthSpec spec;
  spec.seed = 21;
  spec.n_reports = 5;
  spec.sentences_per_report = 9;
  spec.summary_sentences = 3;
  spec.noise_rate = 0.1;
  spec.testing_reports = 2;
  const auto data = fixture::make_synth(spec);
  ASSERT_EQ(data.dataset.training.examples.size(), data.corpus.training.size());
  for (std::size_t i = 0; i < data.corpus.training.size(); ++i) {
    const auto& gen = data.corpus.training[i];
    const auto& ex = data.dataset.training.examples[i];
    EXPECT_EQ(ex.document.id, gen.id);
    EXPECT_EQ(sentence_tokens(ex.document.sentences), gen.sentences);
    ASSERT_EQ(ex.summaries.summaries.size(), gen.summaries.size());
    for (std::size_t j = 0; j < gen.summaries.size(); ++j) {
      EXPECT_EQ(sentence_tokens(ex.summaries.summaries[j].sentences), gen.summaries[j]);
    }
  }
  EXPECT_EQ(data.dataset.testing.examples.size(), 2u);
}

}  // namespace
}  // namespace narrsum
