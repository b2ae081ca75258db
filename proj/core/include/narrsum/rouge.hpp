#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "narrsum/corpus.hpp"

namespace narrsum::rouge {

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  static RougeScore from(double precision, double recall);
  bool operator==(const RougeScore&) const = default;
};

enum class MetricVariant { kRouge1, kRouge2, kRougeLSentence, kRougeLSummary, kRougeSU4 };

std::string_view variant_name(MetricVariant variant);

using Tokens = std::span<const std::string>;
using SentenceList = std::vector<TokenList>;

std::size_t lcs_length(Tokens a, Tokens b);

/// Positions in `reference` used by one longest common subsequence with
/// `candidate`, ascending. Among all LCS alignments the chosen one has the
/// smallest last reference position, then the smallest second-to-last, and
/// so on.
std::vector<std::size_t> lcs_reference_positions(Tokens reference, Tokens candidate);

/// Clipped n-gram overlap; n must be 1 or 2.
RougeScore rouge_n(Tokens candidate, Tokens reference, int n);

RougeScore rouge_l_sentence(Tokens candidate, Tokens reference);

/// Summary-level ROUGE-L with union LCS per reference sentence. Union hits are
/// clipped by candidate token counts so precision stays within [0, 1].
RougeScore rouge_l_summary(std::span<const TokenList> candidate_sentences,
                           std::span<const TokenList> reference_sentences);

/// Unigrams plus skip-bigrams (i, j) with 0 < j - i <= 4.
RougeScore rouge_su4(Tokens candidate, Tokens reference);

inline constexpr std::size_t kSkipDistance = 4;

TokenList flatten(std::span<const TokenList> sentences);

RougeScore score(std::span<const TokenList> candidate_sentences,
                 std::span<const TokenList> reference_sentences, MetricVariant variant);

/// Max-F1 score over the reference sets; ties go to the lowest index.
/// Throws std::invalid_argument when `reference_sets` is empty.
RougeScore best_against_references(std::span<const TokenList> candidate_sentences,
                                   std::span<const SentenceList> reference_sets,
                                   MetricVariant variant,
                                   std::size_t* best_index = nullptr);

}  // namespace narrsum::rouge
