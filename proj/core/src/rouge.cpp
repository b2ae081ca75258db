#include "narrsum/rouge.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <unordered_map>
#include <utility>

namespace narrsum::rouge {
namespace {

using Table = std::vector<std::vector<std::size_t>>;

Table lcs_table(Tokens a, Tokens b) {
  Table dp(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      dp[i][j] = a[i - 1] == b[j - 1] ? dp[i - 1][j - 1] + 1
                                      : std::max(dp[i - 1][j], dp[i][j - 1]);
    }
  }
  return dp;
}

template <typename Unit>
RougeScore clipped_overlap(const std::map<Unit, std::size_t>& candidate,
                           std::size_t candidate_total,
                           const std::map<Unit, std::size_t>& reference,
                           std::size_t reference_total) {
  if (candidate_total == 0 || reference_total == 0) return {};
  std::size_t hits = 0;
  for (const auto& [unit, count] : candidate) {
    if (auto it = reference.find(unit); it != reference.end()) {
      hits += std::min(count, it->second);
    }
  }
  return RougeScore::from(static_cast<double>(hits) / static_cast<double>(candidate_total),
                          static_cast<double>(hits) / static_cast<double>(reference_total));
}

using Bigram = std::pair<std::string, std::string>;

std::map<std::string, std::size_t> unigram_counts(Tokens tokens) {
  std::map<std::string, std::size_t> counts;
  for (const auto& t : tokens) ++counts[t];
  return counts;
}

}  // namespace

RougeScore RougeScore::from(double precision, double recall) {
  RougeScore s;
  s.precision = precision;
  s.recall = recall;
  s.f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  return s;
}

std::string_view variant_name(MetricVariant variant) {
  switch (variant) {
    case MetricVariant::kRouge1: return "R-1";
    case MetricVariant::kRouge2: return "R-2";
    case MetricVariant::kRougeLSentence: return "R-L(sentence)";
    case MetricVariant::kRougeLSummary: return "R-L";
    case MetricVariant::kRougeSU4: return "R-SU4";
  }
  return "?";
}

std::size_t lcs_length(Tokens a, Tokens b) {
  if (a.empty() || b.empty()) return 0;
  // Two-row DP; the full table is only needed for backtraces.
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::vector<std::size_t> lcs_reference_positions(Tokens reference, Tokens candidate) {
  const Table dp = lcs_table(reference, candidate);
  std::vector<std::size_t> positions;
  std::size_t i = reference.size();
  std::size_t j = candidate.size();
  while (i > 0 && j > 0 && dp[i][j] > 0) {
    const std::size_t k = dp[i][j];
    while (dp[i - 1][j] == k) --i;
    // Reference position i-1 is matched; use the latest candidate position
    // that still leaves an LCS of k-1 on both prefixes.
    std::size_t jj = j;
    while (!(candidate[jj - 1] == reference[i - 1] && dp[i - 1][jj - 1] == k - 1)) --jj;
    positions.push_back(i - 1);
    --i;
    j = jj - 1;
  }
  std::reverse(positions.begin(), positions.end());
  return positions;
}

RougeScore rouge_n(Tokens candidate, Tokens reference, int n) {
  if (n == 1) {
    return clipped_overlap(unigram_counts(candidate), candidate.size(),
                           unigram_counts(reference), reference.size());
  }
  if (n != 2) throw std::invalid_argument("rouge_n: n must be 1 or 2");
  auto bigrams = [](Tokens tokens) {
    std::map<Bigram, std::size_t> counts;
    for (std::size_t i = 1; i < tokens.size(); ++i) ++counts[{tokens[i - 1], tokens[i]}];
    return counts;
  };
  const std::size_t cand_total = candidate.size() >= 2 ? candidate.size() - 1 : 0;
  const std::size_t ref_total = reference.size() >= 2 ? reference.size() - 1 : 0;
  return clipped_overlap(bigrams(candidate), cand_total, bigrams(reference), ref_total);
}

RougeScore rouge_l_sentence(Tokens candidate, Tokens reference) {
  if (candidate.empty() || reference.empty()) return {};
  const double lcs = static_cast<double>(lcs_length(candidate, reference));
  return RougeScore::from(lcs / static_cast<double>(candidate.size()),
                          lcs / static_cast<double>(reference.size()));
}

RougeScore rouge_l_summary(std::span<const TokenList> candidate_sentences,
                           std::span<const TokenList> reference_sentences) {
  std::size_t candidate_words = 0;
  std::unordered_map<std::string, std::size_t> candidate_budget;
  for (const auto& c : candidate_sentences) {
    candidate_words += c.size();
    for (const auto& t : c) ++candidate_budget[t];
  }
  std::size_t reference_words = 0;
  for (const auto& r : reference_sentences) reference_words += r.size();
  if (candidate_words == 0 || reference_words == 0) return {};

  std::size_t hits = 0;
  for (const auto& r : reference_sentences) {
    std::vector<bool> in_union(r.size(), false);
    for (const auto& c : candidate_sentences) {
      for (std::size_t p : lcs_reference_positions(r, c)) in_union[p] = true;
    }
    for (std::size_t p = 0; p < r.size(); ++p) {
      if (!in_union[p]) continue;
      auto it = candidate_budget.find(r[p]);
      if (it != candidate_budget.end() && it->second > 0) {
        --it->second;
        ++hits;
      }
    }
  }
  return RougeScore::from(static_cast<double>(hits) / static_cast<double>(candidate_words),
                          static_cast<double>(hits) / static_cast<double>(reference_words));
}

RougeScore rouge_su4(Tokens candidate, Tokens reference) {
  // Unigram keys are stored as (token, "") with a marker so they never
  // collide with skip-bigrams.
  auto units = [](Tokens tokens, std::size_t& total) {
    std::map<std::pair<std::string, std::string>, std::size_t> counts;
    total = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      ++counts[{tokens[i], std::string(1, '\0')}];
      ++total;
      for (std::size_t j = i + 1; j < tokens.size() && j - i <= kSkipDistance; ++j) {
        ++counts[{tokens[i], tokens[j]}];
        ++total;
      }
    }
    return counts;
  };
  std::size_t cand_total = 0;
  std::size_t ref_total = 0;
  const auto cand = units(candidate, cand_total);
  const auto ref = units(reference, ref_total);
  return clipped_overlap(cand, cand_total, ref, ref_total);
}

TokenList flatten(std::span<const TokenList> sentences) {
  TokenList out;
  for (const auto& s : sentences) out.insert(out.end(), s.begin(), s.end());
  return out;
}

RougeScore score(std::span<const TokenList> candidate_sentences,
                 std::span<const TokenList> reference_sentences, MetricVariant variant) {
  if (variant == MetricVariant::kRougeLSummary) {
    return rouge_l_summary(candidate_sentences, reference_sentences);
  }
  const TokenList cand = flatten(candidate_sentences);
  const TokenList ref = flatten(reference_sentences);
  switch (variant) {
    case MetricVariant::kRouge1: return rouge_n(cand, ref, 1);
    case MetricVariant::kRouge2: return rouge_n(cand, ref, 2);
    case MetricVariant::kRougeLSentence: return rouge_l_sentence(cand, ref);
    case MetricVariant::kRougeSU4: return rouge_su4(cand, ref);
    case MetricVariant::kRougeLSummary: break;
  }
  return {};
}

RougeScore best_against_references(std::span<const TokenList> candidate_sentences,
                                   std::span<const SentenceList> reference_sets,
                                   MetricVariant variant, std::size_t* best_index) {
  if (reference_sets.empty()) {
    throw std::invalid_argument("best_against_references: no reference summaries");
  }
  RougeScore best;
  std::size_t best_at = 0;
  for (std::size_t i = 0; i < reference_sets.size(); ++i) {
    const RougeScore s = score(candidate_sentences, reference_sets[i], variant);
    if (i == 0 || s.f1 > best.f1) {
      best = s;
      best_at = i;
    }
  }
  if (best_index) *best_index = best_at;
  return best;
}

}  // namespace narrsum::rouge
