#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "narrsum/abstractor.hpp"
#include "narrsum/autodiff.hpp"
#include "narrsum/corpus.hpp"
#include "narrsum/extractor.hpp"
#include "narrsum/optim.hpp"

namespace narrsum::rl {

/// Sentence-level ROUGE-L F1 of `generated` against `target`.
double compute_reward(std::span<const std::string> generated, std::span<const std::string> target);

struct Step {
  std::size_t action = 0;  // sentence index, or the document's sentence count for stop
  double log_prob = 0.0;
  double reward = 0.0;
  double value = 0.0;
};

struct Trajectory {
  std::string report_id;
  std::vector<Step> steps;
  std::vector<double> returns;  // undiscounted return from each step
  bool stopped = false;

  double total_reward() const;
  std::vector<std::size_t> chosen() const;
};

/// G_t = r_{t+1} + ... + r_T.
std::vector<double> returns_to_go(std::span<const double> rewards);

/// Divides every advantage by the batch root-mean-square; the mean is not
/// subtracted, so signs are preserved.
void normalize_advantages(std::span<double> advantages);

/// One RL episode: a report and the gold sentences of its chosen reference.
struct Episode {
  std::string report_id;
  extractor::IdDocument doc;
  std::vector<TokenList> gold;
};

/// Maps a chosen report sentence to the text scored against the gold sentence.
class Rewriter {
 public:
  virtual ~Rewriter() = default;
  virtual TokenList rewrite(std::span<const int> sentence) = 0;
};

/// Identity rewrite through the vocabulary.
class VocabRewriter : public Rewriter {
 public:
  explicit VocabRewriter(const Vocab& vocab) : vocab_(vocab) {}
  TokenList rewrite(std::span<const int> sentence) override;

 private:
  const Vocab& vocab_;
};

/// Paraphrases with a frozen abstractor; outputs are cached per input.
class AbstractorRewriter : public Rewriter {
 public:
  AbstractorRewriter(const abstractor::Abstractor& model, const Vocab& vocab,
                     abstractor::DecodeConfig decode)
      : model_(model), vocab_(vocab), decode_(decode) {}
  TokenList rewrite(std::span<const int> sentence) override;
  std::size_t cache_size() const { return cache_.size(); }

 private:
  const abstractor::Abstractor& model_;
  const Vocab& vocab_;
  abstractor::DecodeConfig decode_;
  std::map<std::vector<int>, TokenList> cache_;
};

/// Value head: affine map from a detached decoder state to a scalar.
class Critic {
 public:
  Critic(std::size_t state_dim, std::uint64_t seed, double init_scale = 0.1);
  ad::ParameterSet& params() { return params_; }
  const ad::ParameterSet& params() const { return params_; }
  ad::Expr value(ad::Graph& g, ad::Expr state);

 private:
  ad::ParameterSet params_;
  ad::Parameter* weight_ = nullptr;
  ad::Parameter* bias_ = nullptr;
};

enum class Mode { kSample, kGreedy };

/// A trajectory together with the graph nodes needed for an update.
struct Rollout {
  ad::Graph graph;
  Trajectory trajectory;
  std::vector<ad::Expr> log_probs;
  std::vector<ad::Expr> values;
  std::vector<ad::Expr> entropies;  // per step, only when requested
};

Rollout rollout(const Episode& episode, extractor::Extractor& policy, Critic& critic,
                Rewriter& rewriter, Mode mode, std::mt19937_64& rng, bool with_entropy = false);

/// -sum_t A_t * log_prob_t with the advantages as constants.
ad::Expr policy_loss(ad::Graph& g, std::span<const ad::Expr> log_probs,
                     std::span<const double> advantages);
/// sum_t (G_t - v_t)^2.
ad::Expr critic_loss(ad::Graph& g, std::span<const ad::Expr> values,
                     std::span<const double> returns);

struct A2cConfig {
  double lr = 0.001;
  double critic_lr = 0.001;
  double clip_norm = 1.0;
  bool normalize_advantages = false;
  /// Weight of the policy-entropy bonus subtracted from the loss; 0 disables it.
  double entropy_weight = 0.0;
};

struct UpdateStats {
  std::size_t trajectories = 0;
  double mean_reward = 0.0;
  double mean_advantage = 0.0;
  double critic_loss = 0.0;
  bool discarded = false;
  std::string diagnostic;
};

class A2cUpdater {
 public:
  A2cUpdater(extractor::Extractor& policy, Critic& critic, const A2cConfig& config);
  /// Accumulates gradients from every rollout and takes one step on the
  /// policy and one on the critic.
  UpdateStats update(std::span<Rollout> batch);

 private:
  extractor::Extractor& policy_;
  Critic& critic_;
  A2cConfig config_;
  ad::Adam policy_opt_;
  ad::Adam critic_opt_;
};

struct RlConfig {
  std::size_t episodes = 1000;
  std::size_t batch_size = 16;
  A2cConfig a2c;
  std::uint64_t seed = 1;
};

struct CurveRow {
  std::size_t episode = 0;  // episodes consumed so far
  double mean_reward = 0.0;
  double mean_advantage = 0.0;
  double critic_loss = 0.0;
};

struct RlResult {
  std::vector<CurveRow> curve;
  std::vector<std::string> warnings;
};

RlResult train_rl(std::span<const Episode> episodes, extractor::Extractor& policy, Critic& critic,
                  Rewriter& rewriter, const RlConfig& config);

/// Mean over episodes of the greedy trajectory's total reward divided by the
/// number of gold sentences.
double mean_greedy_reward(std::span<const Episode> episodes, extractor::Extractor& policy,
                          Critic& critic, Rewriter& rewriter);

void write_curve_csv(const std::filesystem::path& path, std::span<const CurveRow> curve);

}  // namespace narrsum::rl
