#include "narrsum/config.hpp"

#include <fstream>
#include <set>

#include "narrsum/corpus.hpp"

namespace narrsum {

nlohmann::ordered_json RunConfig::to_json() const {
  return {{"data_root", data_root},
          {"seed", seed},
          {"vocab_size", vocab_size},
          {"embedding_dim", embedding_dim},
          {"max_sentence_tokens", max_sentence_tokens},
          {"max_extract_sentences", max_extract_sentences},
          {"lr", lr},
          {"lr_decay", lr_decay},
          {"clip_norm", clip_norm},
          {"batch_size", batch_size},
          {"checkpoint_every_batches", checkpoint_every_batches},
          {"beam_width", beam_width},
          {"repetition_penalty", repetition_penalty},
          {"word_limit", word_limit},
          {"hidden_dim", hidden_dim},
          {"attention_dim", attention_dim},
          {"extractor_epochs", extractor_epochs},
          {"abstractor_epochs", abstractor_epochs},
          {"rl_episodes", rl_episodes},
          {"rl_lr", rl_lr},
          {"normalize_advantages", normalize_advantages},
          {"entropy_weight", entropy_weight},
          {"freeze_embeddings", freeze_embeddings},
          {"aggregation", aggregation},
          {"embeddings_path", embeddings_path}};
}

namespace {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->template get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("config field '") + key + "': " + e.what());
  }
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("config must be a JSON object");
  RunConfig c;
  std::set<std::string> known;
  const auto defaults = c.to_json();
  for (const auto& [key, value] : defaults.items()) known.insert(key);
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw DataError("unknown config key '" + key + "'");
  }
  read_field(j, "data_root", c.data_root);
  read_field(j, "seed", c.seed);
  read_field(j, "vocab_size", c.vocab_size);
  read_field(j, "embedding_dim", c.embedding_dim);
  read_field(j, "max_sentence_tokens", c.max_sentence_tokens);
  read_field(j, "max_extract_sentences", c.max_extract_sentences);
  read_field(j, "lr", c.lr);
  read_field(j, "lr_decay", c.lr_decay);
  read_field(j, "clip_norm", c.clip_norm);
  read_field(j, "batch_size", c.batch_size);
  read_field(j, "checkpoint_every_batches", c.checkpoint_every_batches);
  read_field(j, "beam_width", c.beam_width);
  read_field(j, "repetition_penalty", c.repetition_penalty);
  read_field(j, "word_limit", c.word_limit);
  read_field(j, "hidden_dim", c.hidden_dim);
  read_field(j, "attention_dim", c.attention_dim);
  read_field(j, "extractor_epochs", c.extractor_epochs);
  read_field(j, "abstractor_epochs", c.abstractor_epochs);
  read_field(j, "rl_episodes", c.rl_episodes);
  read_field(j, "rl_lr", c.rl_lr);
  read_field(j, "normalize_advantages", c.normalize_advantages);
  read_field(j, "entropy_weight", c.entropy_weight);
  read_field(j, "freeze_embeddings", c.freeze_embeddings);
  read_field(j, "aggregation", c.aggregation);
  read_field(j, "embeddings_path", c.embeddings_path);
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("config " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

void RunConfig::validate() const {
  auto fail = [](const std::string& what) { throw DataError("invalid config: " + what); };
  if (vocab_size == 0) fail("vocab_size must be positive");
  if (embedding_dim == 0 || hidden_dim == 0 || attention_dim == 0) fail("dimensions must be positive");
  if (max_sentence_tokens == 0) fail("max_sentence_tokens must be positive");
  if (max_extract_sentences == 0) fail("max_extract_sentences must be positive");
  if (!(lr >= 0.0) || !(rl_lr >= 0.0)) fail("learning rates must be non-negative");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) fail("lr_decay must be in (0, 1]");
  if (!(entropy_weight >= 0.0)) fail("entropy_weight must be non-negative");
  if (!(clip_norm > 0.0)) fail("clip_norm must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
  if (beam_width == 0) fail("beam_width must be >= 1");
  if (!(repetition_penalty >= 1.0)) fail("repetition_penalty must be >= 1");
  if (word_limit == 0) fail("word_limit must be >= 1");
  if (aggregation != "max" && aggregation != "mean") fail("aggregation must be max or mean");
}

extractor::ExtractorConfig RunConfig::extractor_config(std::size_t vocab_entries) const {
  extractor::ExtractorConfig c;
  c.vocab_size = vocab_entries;
  c.embedding_dim = embedding_dim;
  c.word_hidden = hidden_dim;
  c.sentence_hidden = hidden_dim;
  c.decoder_hidden = hidden_dim;
  c.attention_dim = attention_dim;
  c.max_steps = max_extract_sentences;
  return c;
}

abstractor::AbstractorConfig RunConfig::abstractor_config(std::size_t vocab_entries) const {
  abstractor::AbstractorConfig c;
  c.vocab_size = vocab_entries;
  c.embedding_dim = embedding_dim;
  c.hidden = hidden_dim;
  c.attention_dim = attention_dim;
  return c;
}

abstractor::DecodeConfig RunConfig::decode_config() const {
  abstractor::DecodeConfig d;
  d.beam_width = beam_width;
  d.repetition_penalty = repetition_penalty;
  d.max_output_tokens = max_sentence_tokens;
  return d;
}

extractor::TrainConfig RunConfig::extractor_train_config() const {
  extractor::TrainConfig t;
  t.epochs = extractor_epochs;
  t.batch_size = batch_size;
  t.lr = lr;
  t.lr_decay = lr_decay;
  t.clip_norm = clip_norm;
  t.checkpoint_every_batches = checkpoint_every_batches;
  t.seed = seed;
  return t;
}

abstractor::TrainConfig RunConfig::abstractor_train_config() const {
  abstractor::TrainConfig t;
  t.epochs = abstractor_epochs;
  t.batch_size = batch_size;
  t.lr = lr;
  t.lr_decay = lr_decay;
  t.clip_norm = clip_norm;
  t.checkpoint_every_batches = checkpoint_every_batches;
  t.seed = seed;
  return t;
}

rl::RlConfig RunConfig::rl_config() const {
  rl::RlConfig r;
  r.episodes = rl_episodes;
  r.batch_size = batch_size;
  r.a2c.lr = rl_lr;
  r.a2c.critic_lr = rl_lr;
  r.a2c.clip_norm = clip_norm;
  r.a2c.normalize_advantages = normalize_advantages;
  r.a2c.entropy_weight = entropy_weight;
  r.seed = seed;
  return r;
}

}  // namespace narrsum
