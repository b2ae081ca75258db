#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "narrsum/abstractor.hpp"
#include "narrsum/extractor.hpp"
#include "narrsum/rl.hpp"

namespace narrsum {

/// Run configuration. JSON files must use exactly these field names; unknown
/// keys are rejected.
struct RunConfig {
  std::string data_root;
  std::uint64_t seed = 1;
  std::size_t vocab_size = 20000;
  std::size_t embedding_dim = 300;
  std::size_t max_sentence_tokens = 60;
  std::size_t max_extract_sentences = 80;
  double lr = 0.001;
  double lr_decay = 0.5;
  double clip_norm = 1.0;
  std::size_t batch_size = 16;
  std::size_t checkpoint_every_batches = 16;
  std::size_t beam_width = 2;
  double repetition_penalty = 2.0;
  std::size_t word_limit = 1000;

  std::size_t hidden_dim = 128;
  std::size_t attention_dim = 128;
  std::size_t extractor_epochs = 10;
  std::size_t abstractor_epochs = 10;
  std::size_t rl_episodes = 1000;
  double rl_lr = 0.001;
  bool normalize_advantages = false;
  double entropy_weight = 0.0;
  bool freeze_embeddings = false;   // keep loaded embeddings fixed during training
  std::string aggregation = "max";  // multi-reference: max | mean
  std::string embeddings_path;      // optional word2vec text file

  nlohmann::ordered_json to_json() const;
  /// Throws DataError on unknown keys or wrong value types.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
  void validate() const;

  /// Model shapes for a vocabulary of `vocab_entries` ids (reserved included).
  extractor::ExtractorConfig extractor_config(std::size_t vocab_entries) const;
  abstractor::AbstractorConfig abstractor_config(std::size_t vocab_entries) const;
  abstractor::DecodeConfig decode_config() const;
  extractor::TrainConfig extractor_train_config() const;
  abstractor::TrainConfig abstractor_train_config() const;
  rl::RlConfig rl_config() const;
};

}  // namespace narrsum
