#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "narrsum/corpus.hpp"

namespace narrsum::baselines {

inline constexpr std::size_t kWordLimit = 1000;

struct RankConfig {
  double damping = 0.85;
  double tolerance = 1e-6;  // L1 change between iterations
  std::size_t max_iterations = 100;
  double lexrank_threshold = 0.1;
};

/// Row-major n x n symmetric, non-negative weights with a zero diagonal.
struct SentenceGraph {
  std::size_t n = 0;
  std::vector<double> weights;

  double at(std::size_t i, std::size_t j) const { return weights[i * n + j]; }
};

SentenceGraph textrank_graph(std::span<const TokenList> sentences);
SentenceGraph lexrank_graph(std::span<const TokenList> sentences, double threshold = 0.1);

/// Weighted PageRank by power iteration. A node without outgoing weight
/// spreads its mass uniformly. Scores are non-negative and sum to 1.
std::vector<double> pagerank(const SentenceGraph& graph, const RankConfig& config = {});

/// Takes sentences in descending score (ties: lower index) until the next
/// would push the total past `word_limit`, then returns them in document
/// order. The top sentence is always taken.
std::vector<std::size_t> select_by_score(std::span<const TokenList> sentences,
                                         std::span<const double> scores, std::size_t word_limit);

std::vector<std::size_t> textrank(std::span<const TokenList> sentences,
                                  std::size_t word_limit = kWordLimit,
                                  const RankConfig& config = {});
std::vector<std::size_t> lexrank(std::span<const TokenList> sentences,
                                 std::size_t word_limit = kWordLimit,
                                 const RankConfig& config = {});
/// Leading sentences until the limit would be exceeded; sentence 0 is always
/// included and truncated later when emitted.
std::vector<std::size_t> lead_n(std::span<const TokenList> sentences,
                                std::size_t word_limit = kWordLimit);

}  // namespace narrsum::baselines
