#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "narrsum/autodiff.hpp"

namespace narrsum::abstractor {

struct AbstractorConfig {
  std::size_t vocab_size = 20004;
  std::size_t embedding_dim = 300;
  std::size_t hidden = 128;
  std::size_t attention_dim = 128;
  double init_scale = 0.1;

  nlohmann::json to_json() const;
  static AbstractorConfig from_json(const nlohmann::json& j);
};

struct DecodeConfig {
  std::size_t beam_width = 2;
  double repetition_penalty = 2.0;
  std::size_t max_output_tokens = 60;

  void validate() const;
};

struct Hypothesis {
  std::vector<int> tokens;  // without start/end markers
  double score = 0.0;       // penalized log-probability, end token included when finished
  bool finished = false;
};

/// Sentence-level attention encoder-decoder: BiLSTM encoder, LSTM decoder with
/// input feeding and additive attention, tanh combination layer, vocabulary
/// softmax.
class Abstractor {
 public:
  Abstractor(AbstractorConfig config, std::uint64_t seed);

  const AbstractorConfig& config() const { return config_; }
  ad::ParameterSet& params() { return params_; }
  const ad::ParameterSet& params() const { return params_; }
  std::string config_hash() const;

  struct LossResult {
    ad::Expr loss_sum;  // summed token cross-entropy over target + end
    std::size_t tokens = 0;
    std::size_t correct = 0;
  };

  /// Teacher-forced loss; gradients flow into this abstractor.
  LossResult teacher_forced(ad::Graph& g, std::span<const int> source,
                            std::span<const int> target);

  /// Beam search. Throws std::invalid_argument on empty input.
  Hypothesis decode(std::span<const int> source, const DecodeConfig& config) const;
  std::vector<int> paraphrase(std::span<const int> source, const DecodeConfig& config) const;

  /// Penalized score of forcing `tokens` (plus end when `finished`).
  double score_sequence(std::span<const int> source, std::span<const int> tokens,
                        double repetition_penalty, bool finished) const;

 private:
  struct Bound;
  struct State;
  friend struct Bound;

  Hypothesis search(std::span<const int> source, const DecodeConfig& config,
                    std::size_t width) const;

  AbstractorConfig config_;
  ad::ParameterSet params_;
  ad::Parameter* embedding_ = nullptr;
  ad::LstmWeights enc_fwd_, enc_bwd_;
  ad::LstmWeights decoder_;
  ad::AttentionWeights attention_;
  ad::Parameter* init_w_ = nullptr;
  ad::Parameter* init_b_ = nullptr;
  ad::Parameter* combine_w_ = nullptr;
  ad::Parameter* combine_b_ = nullptr;
  ad::Parameter* out_w_ = nullptr;
  ad::Parameter* out_b_ = nullptr;
};

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  double lr = 0.001;
  double lr_decay = 0.5;
  double clip_norm = 1.0;
  std::size_t checkpoint_every_batches = 16;
  std::uint64_t seed = 1;
};

struct Pair {
  std::vector<int> source;
  std::vector<int> target;
};

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double token_accuracy = 0.0;
  double validation_loss = -1.0;
  double lr = 0.0;
};

struct TrainHooks {
  std::function<void(std::size_t batches)> on_checkpoint;
  std::function<bool(const EpochStats&)> stop_after;
};

struct TrainResult {
  std::vector<EpochStats> epochs;
  std::vector<std::string> warnings;
  std::size_t batches = 0;
};

TrainResult train_abstractor(Abstractor& model, std::span<const Pair> training,
                             std::span<const Pair> validation, const TrainConfig& config,
                             const TrainHooks& hooks = {});

/// Mean token loss and teacher-forced accuracy over `pairs`.
std::pair<double, double> evaluate(Abstractor& model, std::span<const Pair> pairs);

}  // namespace narrsum::abstractor
