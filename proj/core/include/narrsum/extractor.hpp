#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "narrsum/autodiff.hpp"

namespace narrsum::extractor {

/// A document as token ids, one inner vector per sentence.
using IdDocument = std::vector<std::vector<int>>;

struct ExtractorConfig {
  std::size_t vocab_size = 20004;
  std::size_t embedding_dim = 300;
  std::size_t word_hidden = 128;
  std::size_t sentence_hidden = 128;
  std::size_t decoder_hidden = 128;
  std::size_t attention_dim = 128;
  std::size_t max_steps = 80;
  double init_scale = 0.1;

  nlohmann::json to_json() const;
  static ExtractorConfig from_json(const nlohmann::json& j);
};

struct Extraction {
  std::string report_id;
  std::vector<std::size_t> indices;
  std::vector<double> step_log_probs;
  /// Highest-scoring real sentence at the first step; used when the
  /// extraction is empty.
  std::size_t first_step_best = 0;
};

class Extractor {
 public:
  Extractor(ExtractorConfig config, std::uint64_t seed);

  const ExtractorConfig& config() const { return config_; }
  ad::ParameterSet& params() { return params_; }
  const ad::ParameterSet& params() const { return params_; }
  std::string config_hash() const;

  /// Greedy decoding with masking of already chosen sentences.
  Extraction extract(const IdDocument& doc, const std::string& report_id = {}) const;

  /// Loads word2vec text-format vectors into the embedding rows of known
  /// tokens. Returns the number of rows replaced.
  std::size_t load_embeddings(const std::filesystem::path& word2vec_text,
                              const std::function<int(const std::string&)>& token_id);

 private:
  friend class PointerSession;
  friend std::vector<ad::Expr> encode_document(ad::Graph&, const Extractor&, const IdDocument&,
                                               bool);

  ExtractorConfig config_;
  ad::ParameterSet params_;
  ad::Parameter* embedding_ = nullptr;
  ad::LstmWeights word_fwd_, word_bwd_;
  ad::LstmWeights sent_fwd_, sent_bwd_;
  ad::LstmWeights decoder_;
  ad::AttentionWeights attention_;
  ad::Parameter* stop_ = nullptr;
};

/// Sentence representations from the hierarchical encoder: word-level BiLSTM
/// final states per sentence, then a sentence-level BiLSTM over those.
std::vector<ad::Expr> encode_document(ad::Graph& g, const Extractor& extractor,
                                      const IdDocument& doc, bool trainable);

/// Step-by-step pointer decoding over one document. Candidate index
/// `sentence_count()` is the stop sentinel.
class PointerSession {
 public:
  /// Gradients reach `extractor` through this overload only.
  PointerSession(ad::Graph& g, Extractor& extractor, const IdDocument& doc);
  PointerSession(ad::Graph& g, const Extractor& extractor, const IdDocument& doc);

  std::size_t sentence_count() const { return n_; }
  std::size_t stop_index() const { return n_; }
  std::size_t steps_taken() const { return chosen_.size(); }
  const std::vector<std::size_t>& chosen() const { return chosen_; }
  bool finished() const { return finished_; }

  /// Attention logits (1 x (n+1)) for the current step.
  ad::Expr scores();
  /// Decoder hidden state for the current step.
  ad::Expr decoder_state();
  const ad::Mask& mask() const { return mask_; }

  void choose(std::size_t candidate);

  const std::vector<ad::Expr>& sentence_vectors() const { return sentences_; }

 private:
  void init(const Extractor& extractor, const IdDocument& doc, bool trainable);
  void advance();

  ad::Graph* g_;
  std::size_t n_ = 0;
  std::size_t max_steps_ = 0;
  std::vector<ad::Expr> sentences_;
  ad::AttentionMemory memory_;
  ad::LstmNodes decoder_;
  ad::LstmState state_;
  ad::Expr input_;
  ad::Expr scores_;
  bool step_ready_ = false;
  ad::Mask mask_;
  std::vector<std::size_t> chosen_;
  bool finished_ = false;
};

/// Decoder target sequence for `targets`: the targets (capped at max_steps)
/// followed by the stop sentinel unless every sentence is already chosen.
std::vector<std::size_t> target_sequence(std::span<const std::size_t> targets,
                                         std::size_t sentence_count, std::size_t max_steps);

struct TeacherForcedResult {
  ad::Expr loss_sum;  // sum of per-step cross-entropies
  std::size_t steps = 0;
  std::size_t correct = 0;
};

TeacherForcedResult teacher_forced(ad::Graph& g, Extractor& extractor, const IdDocument& doc,
                                   std::span<const std::size_t> targets);

struct ExtractorExample {
  std::string report_id;
  IdDocument doc;
  std::vector<std::size_t> targets;
};

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  double lr = 0.001;
  double lr_decay = 0.5;
  double clip_norm = 1.0;
  std::size_t checkpoint_every_batches = 16;
  std::uint64_t seed = 1;
  bool shuffle = true;
};

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double step_accuracy = 0.0;  // teacher-forced argmax accuracy
  double validation_loss = -1.0;
  double lr = 0.0;
};

struct TrainHooks {
  /// Called after every `checkpoint_every_batches` optimizer steps with the
  /// running batch count.
  std::function<void(std::size_t batches)> on_checkpoint;
  /// Called after each epoch; returning true stops training.
  std::function<bool(const EpochStats&)> stop_after;
};

struct TrainResult {
  std::vector<EpochStats> epochs;
  std::vector<std::string> warnings;
  std::size_t batches = 0;
};

TrainResult train_extractor(Extractor& extractor, std::span<const ExtractorExample> training,
                            std::span<const ExtractorExample> validation,
                            const TrainConfig& config, const TrainHooks& hooks = {});

/// Mean per-step cross-entropy without updating parameters.
double evaluate_loss(Extractor& extractor, std::span<const ExtractorExample> examples);

/// Fraction of decoder steps (targets plus stop) where greedy extraction
/// agrees with the target sequence position by position.
double greedy_step_accuracy(const Extractor& extractor,
                            std::span<const ExtractorExample> examples);

std::string extraction_json_line(const Extraction& extraction);
Extraction extraction_from_json_line(const std::string& line);

}  // namespace narrsum::extractor
