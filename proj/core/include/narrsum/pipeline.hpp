#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "narrsum/corpus.hpp"
#include "narrsum/extractor.hpp"
#include "narrsum/rl.hpp"
#include "narrsum/rouge.hpp"

namespace narrsum::pipeline {

/// First min(|tokens|, limit) tokens. Throws std::invalid_argument when
/// limit is 0.
TokenList truncate_to_word_limit(std::span<const std::string> tokens, std::size_t limit);

/// Applies the word limit across a sentence sequence; a sentence cut to zero
/// tokens is dropped.
std::vector<TokenList> truncate_sentences(std::span<const TokenList> sentences, std::size_t limit);

/// One sentence per line: tokens joined by single spaces, final period.
std::string detokenize(std::span<const TokenList> sentences);

/// Inverse of detokenize; also accepts free text with several sentences per
/// line.
std::vector<TokenList> parse_prediction(std::string_view text);
std::vector<TokenList> read_prediction(const std::filesystem::path& path);

std::size_t word_count(std::span<const TokenList> sentences);

/// Vocabulary over the training reports and their gold summaries.
Vocab training_vocab(const Split& training, std::size_t max_size);

/// Report sentences as ids, capped at the extractor's sentence length.
extractor::IdDocument encode_document(const Vocab& vocab, const Document& doc);

/// Extract, rewrite every chosen sentence in order, enforce the word limit.
/// An empty extraction falls back to the best first-step sentence.
std::vector<TokenList> summarize(const Document& doc, const Vocab& vocab,
                                 const extractor::Extractor& extractor, rl::Rewriter& rewriter,
                                 std::size_t word_limit);

/// Emits the given report sentences in order under the word limit.
std::vector<TokenList> emit_extraction(const Document& doc, std::span<const std::size_t> indices,
                                       std::size_t word_limit);

enum class Aggregation { kMax, kMean };
Aggregation parse_aggregation(std::string_view name);

/// Report row order: R-L (summary level), R-1, R-2, R-SU4.
inline constexpr std::array<rouge::MetricVariant, 4> kReportVariants = {
    rouge::MetricVariant::kRougeLSummary, rouge::MetricVariant::kRouge1,
    rouge::MetricVariant::kRouge2, rouge::MetricVariant::kRougeSU4};
inline constexpr std::array<std::string_view, 4> kReportVariantLabels = {"R-L", "R-1", "R-2",
                                                                         "R-SU4"};

using Cells = std::array<rouge::RougeScore, 4>;

struct DocumentScore {
  std::string report_id;
  Cells cells;
};

struct SystemReport {
  std::string system;
  Cells cells;  // mean over scored documents
  std::vector<DocumentScore> documents;
  std::vector<std::string> excluded;  // predictions without references
};

/// Scores every prediction against its report's references; max-F1 or mean
/// over references per document, then the mean over documents.
SystemReport evaluate_system(const std::string& system,
                             const std::map<std::string, std::vector<TokenList>>& predictions,
                             const Split& references, Aggregation aggregation = Aggregation::kMax);

/// Rows: "<Precision|Recall|F-1>(<variant>)" in report order; one column per
/// system.
std::string report_csv(std::span<const SystemReport> reports);
std::string report_text(std::span<const SystemReport> reports);
std::string documents_csv(std::span<const SystemReport> reports);

}  // namespace narrsum::pipeline
