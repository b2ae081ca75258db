#include "narrsum/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

namespace narrsum::baselines {

namespace {

void require_nonempty(std::span<const TokenList> sentences, const char* who) {
  if (sentences.empty()) throw std::invalid_argument(std::string(who) + ": empty document");
}

}  // namespace

SentenceGraph textrank_graph(std::span<const TokenList> sentences) {
  SentenceGraph g;
  g.n = sentences.size();
  g.weights.assign(g.n * g.n, 0.0);
  std::vector<std::set<std::string>> sets;
  sets.reserve(g.n);
  for (const auto& s : sentences) sets.emplace_back(s.begin(), s.end());
  for (std::size_t i = 0; i < g.n; ++i) {
    for (std::size_t j = i + 1; j < g.n; ++j) {
      std::size_t shared = 0;
      for (const auto& t : sets[i]) shared += sets[j].count(t);
      const double denom = std::log(static_cast<double>(sentences[i].size())) +
                           std::log(static_cast<double>(sentences[j].size()));
      const double w = (shared == 0 || !(denom > 0.0)) ? 0.0 : static_cast<double>(shared) / denom;
      g.weights[i * g.n + j] = w;
      g.weights[j * g.n + i] = w;
    }
  }
  return g;
}

SentenceGraph lexrank_graph(std::span<const TokenList> sentences, double threshold) {
  SentenceGraph g;
  g.n = sentences.size();
  g.weights.assign(g.n * g.n, 0.0);

  std::map<std::string, std::size_t> df;
  std::vector<std::map<std::string, double>> tf(g.n);
  for (std::size_t i = 0; i < g.n; ++i) {
    for (const auto& t : sentences[i]) tf[i][t] += 1.0;
    for (const auto& [t, c] : tf[i]) ++df[t];
  }
  const double n = static_cast<double>(g.n);
  std::vector<std::map<std::string, double>> vec(g.n);
  std::vector<double> norm(g.n, 0.0);
  for (std::size_t i = 0; i < g.n; ++i) {
    for (const auto& [t, c] : tf[i]) {
      const double w = c * std::log(n / static_cast<double>(df[t]));
      vec[i][t] = w;
      norm[i] += w * w;
    }
    norm[i] = std::sqrt(norm[i]);
  }
  for (std::size_t i = 0; i < g.n; ++i) {
    for (std::size_t j = i + 1; j < g.n; ++j) {
      if (norm[i] == 0.0 || norm[j] == 0.0) continue;
      double dot = 0.0;
      for (const auto& [t, w] : vec[i]) {
        auto it = vec[j].find(t);
        if (it != vec[j].end()) dot += w * it->second;
      }
      const double cosine = dot / (norm[i] * norm[j]);
      if (cosine >= threshold) {
        g.weights[i * g.n + j] = cosine;
        g.weights[j * g.n + i] = cosine;
      }
    }
  }
  return g;
}

std::vector<double> pagerank(const SentenceGraph& graph, const RankConfig& config) {
  const std::size_t n = graph.n;
  if (n == 0) return {};
  std::vector<double> out_weight(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out_weight[i] += graph.at(i, j);
  }
  const double uniform = 1.0 / static_cast<double>(n);
  std::vector<double> score(n, uniform);
  std::vector<double> next(n);
  for (std::size_t iter = 0; iter < config.max_iterations; ++iter) {
    double dangling = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (out_weight[i] == 0.0) dangling += score[i];
    }
    for (std::size_t j = 0; j < n; ++j) {
      double incoming = dangling * uniform;
      for (std::size_t i = 0; i < n; ++i) {
        if (out_weight[i] > 0.0) incoming += score[i] * graph.at(i, j) / out_weight[i];
      }
      next[j] = (1.0 - config.damping) * uniform + config.damping * incoming;
    }
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) change += std::abs(next[i] - score[i]);
    score.swap(next);
    if (change < config.tolerance) break;
  }
  const double total = std::accumulate(score.begin(), score.end(), 0.0);
  for (double& s : score) s /= total;
  return score;
}

std::vector<std::size_t> select_by_score(std::span<const TokenList> sentences,
                                         std::span<const double> scores, std::size_t word_limit) {
  if (scores.size() != sentences.size()) throw std::invalid_argument("select_by_score: size mismatch");
  std::vector<std::size_t> order(sentences.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<std::size_t> chosen;
  std::size_t words = 0;
  for (std::size_t idx : order) {
    const std::size_t len = sentences[idx].size();
    if (!chosen.empty() && words + len > word_limit) break;
    chosen.push_back(idx);
    words += len;
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

std::vector<std::size_t> textrank(std::span<const TokenList> sentences, std::size_t word_limit,
                                  const RankConfig& config) {
  require_nonempty(sentences, "textrank");
  return select_by_score(sentences, pagerank(textrank_graph(sentences), config), word_limit);
}

std::vector<std::size_t> lexrank(std::span<const TokenList> sentences, std::size_t word_limit,
                                 const RankConfig& config) {
  require_nonempty(sentences, "lexrank");
  return select_by_score(
      sentences, pagerank(lexrank_graph(sentences, config.lexrank_threshold), config), word_limit);
}

std::vector<std::size_t> lead_n(std::span<const TokenList> sentences, std::size_t word_limit) {
  require_nonempty(sentences, "lead_n");
  std::vector<std::size_t> chosen;
  std::size_t words = 0;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (!chosen.empty() && words + sentences[i].size() > word_limit) break;
    chosen.push_back(i);
    words += sentences[i].size();
  }
  return chosen;
}

}  // namespace narrsum::baselines
