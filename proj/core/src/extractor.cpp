#include "narrsum/extractor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "narrsum/checkpoint.hpp"
#include "narrsum/optim.hpp"

namespace narrsum::extractor {
namespace {

using ad::Expr;
using ad::Graph;

Expr bind_param(Graph& g, const ad::Parameter& p, bool trainable) {
  return trainable ? g.param(const_cast<ad::Parameter&>(p)) : g.param(p);
}

ad::LstmNodes bind_lstm(Graph& g, const ad::LstmWeights& w, bool trainable) {
  return ad::bind(g, w, trainable);
}

std::size_t argmax_unmasked(std::span<const double> values, const ad::Mask& mask) {
  std::size_t best = values.size();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!mask.empty() && mask[i]) continue;
    if (best == values.size() || values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace

nlohmann::json ExtractorConfig::to_json() const {
  return {{"vocab_size", vocab_size},           {"embedding_dim", embedding_dim},
          {"word_hidden", word_hidden},         {"sentence_hidden", sentence_hidden},
          {"decoder_hidden", decoder_hidden},   {"attention_dim", attention_dim},
          {"max_steps", max_steps}};
}

ExtractorConfig ExtractorConfig::from_json(const nlohmann::json& j) {
  ExtractorConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
  c.word_hidden = j.at("word_hidden").get<std::size_t>();
  c.sentence_hidden = j.at("sentence_hidden").get<std::size_t>();
  c.decoder_hidden = j.at("decoder_hidden").get<std::size_t>();
  c.attention_dim = j.at("attention_dim").get<std::size_t>();
  c.max_steps = j.at("max_steps").get<std::size_t>();
  return c;
}

Extractor::Extractor(ExtractorConfig config, std::uint64_t seed) : config_(config) {
  const std::size_t sent_in = 2 * config_.word_hidden;
  const std::size_t key_dim = 2 * config_.sentence_hidden;
  embedding_ = &params_.add("embedding", {config_.vocab_size, config_.embedding_dim});
  word_fwd_ = ad::add_lstm(params_, "word_fwd", config_.embedding_dim, config_.word_hidden);
  word_bwd_ = ad::add_lstm(params_, "word_bwd", config_.embedding_dim, config_.word_hidden);
  sent_fwd_ = ad::add_lstm(params_, "sent_fwd", sent_in, config_.sentence_hidden);
  sent_bwd_ = ad::add_lstm(params_, "sent_bwd", sent_in, config_.sentence_hidden);
  decoder_ = ad::add_lstm(params_, "decoder", key_dim, config_.decoder_hidden);
  attention_ = ad::add_attention(params_, "pointer", key_dim, config_.decoder_hidden,
                                 config_.attention_dim);
  stop_ = &params_.add("stop_sentinel", {key_dim, 1});

  std::mt19937_64 rng(seed);
  params_.init_uniform(rng, config_.init_scale);
  for (const auto* lstm : {&word_fwd_, &word_bwd_, &sent_fwd_, &sent_bwd_, &decoder_}) {
    ad::init_forget_bias(*lstm, 1.0);
  }
}

std::string Extractor::config_hash() const { return ad::fnv1a_hex(config_.to_json().dump()); }

std::size_t Extractor::load_embeddings(const std::filesystem::path& word2vec_text,
                                       const std::function<int(const std::string&)>& token_id) {
  std::ifstream in(word2vec_text);
  if (!in) throw std::runtime_error("cannot read embeddings " + word2vec_text.string());
  std::string line;
  std::size_t loaded = 0;
  const std::size_t dim = config_.embedding_dim;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string word;
    fields >> word;
    std::vector<double> values;
    double v = 0.0;
    while (fields >> v) values.push_back(v);
    if (values.size() != dim) continue;  // header line or other dimensionality
    const int id = token_id(word);
    if (id < 4) continue;
    std::copy(values.begin(), values.end(),
              embedding_->data().begin() + static_cast<std::ptrdiff_t>(id) * dim);
    ++loaded;
  }
  return loaded;
}

std::vector<Expr> encode_document(Graph& g, const Extractor& ex, const IdDocument& doc,
                                  bool trainable) {
  if (doc.empty()) throw std::invalid_argument("encode_document: empty document");
  const auto word_fwd = bind_lstm(g, ex.word_fwd_, trainable);
  const auto word_bwd = bind_lstm(g, ex.word_bwd_, trainable);
  const auto sent_fwd = bind_lstm(g, ex.sent_fwd_, trainable);
  const auto sent_bwd = bind_lstm(g, ex.sent_bwd_, trainable);

  std::vector<Expr> sentence_inputs;
  sentence_inputs.reserve(doc.size());
  for (const auto& sentence : doc) {
    if (sentence.empty()) throw std::invalid_argument("encode_document: empty sentence");
    const auto words = trainable
                           ? g.lookup_sequence(*const_cast<ad::Parameter*>(ex.embedding_), sentence)
                           : g.lookup_sequence(std::as_const(*ex.embedding_), sentence);
    const auto states = ad::bilstm_sequence(g, word_fwd, word_bwd, words);
    const Expr ends[] = {states.forward.back(), states.backward.front()};
    sentence_inputs.push_back(g.concat(ends));
  }
  const auto doc_states = ad::bilstm_sequence(g, sent_fwd, sent_bwd, sentence_inputs);
  std::vector<Expr> reps;
  reps.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const Expr parts[] = {doc_states.forward[i], doc_states.backward[i]};
    reps.push_back(g.concat(parts));
  }
  return reps;
}

PointerSession::PointerSession(Graph& g, Extractor& extractor, const IdDocument& doc) : g_(&g) {
  init(extractor, doc, true);
}

PointerSession::PointerSession(Graph& g, const Extractor& extractor, const IdDocument& doc)
    : g_(&g) {
  init(extractor, doc, false);
}

void PointerSession::init(const Extractor& ex, const IdDocument& doc, bool trainable) {
  Graph& g = *g_;
  n_ = doc.size();
  max_steps_ = ex.config().max_steps;
  sentences_ = encode_document(g, ex, doc, trainable);
  std::vector<Expr> keys = sentences_;
  keys.push_back(bind_param(g, *ex.stop_, trainable));
  memory_ = ad::prepare_attention(g, ex.attention_, keys, trainable);
  decoder_ = bind_lstm(g, ex.decoder_, trainable);
  state_ = ad::lstm_zero_state(g, ex.config().decoder_hidden);
  input_ = g.zeros({2 * ex.config().sentence_hidden, 1});
  mask_.assign(n_ + 1, false);
}

void PointerSession::advance() {
  if (step_ready_) return;
  if (finished_) throw std::logic_error("PointerSession: decoding already finished");
  state_ = ad::lstm_cell(*g_, decoder_, input_, state_);
  scores_ = ad::bahdanau_attention(*g_, memory_, state_.h).scores;
  step_ready_ = true;
}

Expr PointerSession::scores() {
  advance();
  return scores_;
}

Expr PointerSession::decoder_state() {
  advance();
  return state_.h;
}

void PointerSession::choose(std::size_t candidate) {
  advance();
  if (candidate > n_ || mask_[candidate]) {
    throw std::invalid_argument("PointerSession: candidate " + std::to_string(candidate) +
                                " is not available");
  }
  step_ready_ = false;
  if (candidate == n_) {
    finished_ = true;
    return;
  }
  chosen_.push_back(candidate);
  mask_[candidate] = true;
  input_ = sentences_[candidate];
  if (chosen_.size() == n_ || chosen_.size() >= max_steps_) finished_ = true;
}

Extraction Extractor::extract(const IdDocument& doc, const std::string& report_id) const {
  Graph g;
  PointerSession session(g, *this, doc);
  Extraction out;
  out.report_id = report_id;
  bool first = true;
  while (!session.finished()) {
    const Expr scores = session.scores();
    const Expr log_probs = g.log_softmax(scores, session.mask());
    const auto values = g.value(scores);
    if (first) {
      out.first_step_best = argmax_unmasked(values.first(session.sentence_count()), {});
      first = false;
    }
    const std::size_t pick = argmax_unmasked(values, session.mask());
    if (pick != session.stop_index()) {
      out.indices.push_back(pick);
      out.step_log_probs.push_back(g.value(log_probs)[pick]);
    }
    session.choose(pick);
  }
  return out;
}

std::vector<std::size_t> target_sequence(std::span<const std::size_t> targets,
                                         std::size_t sentence_count, std::size_t max_steps) {
  std::vector<std::size_t> seq(targets.begin(),
                               targets.begin() + static_cast<std::ptrdiff_t>(
                                                     std::min(targets.size(), max_steps)));
  if (seq.size() < sentence_count && seq.size() < max_steps) seq.push_back(sentence_count);
  return seq;
}

TeacherForcedResult teacher_forced(Graph& g, Extractor& extractor, const IdDocument& doc,
                                   std::span<const std::size_t> targets) {
  PointerSession session(g, extractor, doc);
  const auto seq = target_sequence(targets, doc.size(), extractor.config().max_steps);
  TeacherForcedResult r;
  std::vector<Expr> losses;
  for (std::size_t target : seq) {
    const Expr scores = session.scores();
    const auto& mask = session.mask();
    losses.push_back(g.cross_entropy(scores, target, mask));
    if (argmax_unmasked(g.value(scores), mask) == target) ++r.correct;
    ++r.steps;
    session.choose(target);
  }
  r.loss_sum = g.sum(g.concat(losses));
  return r;
}

TrainResult train_extractor(Extractor& extractor, std::span<const ExtractorExample> training,
                            std::span<const ExtractorExample> validation,
                            const TrainConfig& config, const TrainHooks& hooks) {
  TrainResult result;
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < training.size(); ++i) {
    if (training[i].targets.empty() || training[i].doc.empty()) {
      result.warnings.push_back("report " + training[i].report_id +
                                " has no extraction targets; skipped");
      continue;
    }
    for (std::size_t t : training[i].targets) {
      if (t >= training[i].doc.size()) {
        throw std::invalid_argument("report " + training[i].report_id +
                                    ": target index out of range");
      }
    }
    usable.push_back(i);
  }
  if (usable.empty()) return result;

  ad::Adam adam(extractor.params(), {.lr = config.lr});
  ad::PlateauDecay decay(config.lr_decay);
  std::mt19937_64 rng(config.seed);
  const std::size_t batch_size = std::max<std::size_t>(1, config.batch_size);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.shuffle) std::shuffle(usable.begin(), usable.end(), rng);
    double loss_total = 0.0;
    std::size_t steps_total = 0;
    std::size_t correct_total = 0;
    for (std::size_t start = 0; start < usable.size(); start += batch_size) {
      const std::size_t end = std::min(usable.size(), start + batch_size);
      std::size_t batch_steps = 0;
      for (std::size_t k = start; k < end; ++k) {
        const auto& ex = training[usable[k]];
        batch_steps +=
            target_sequence(ex.targets, ex.doc.size(), extractor.config().max_steps).size();
      }
      for (std::size_t k = start; k < end; ++k) {
        const auto& ex = training[usable[k]];
        Graph g;
        const auto tf = teacher_forced(g, extractor, ex.doc, ex.targets);
        const Expr loss = g.scale(tf.loss_sum, 1.0 / static_cast<double>(batch_steps));
        g.backward(loss);
        loss_total += g.scalar_value(tf.loss_sum);
        steps_total += tf.steps;
        correct_total += tf.correct;
      }
      try {
        ad::clipped_step(adam, config.clip_norm);
      } catch (const ad::NonFiniteGradient& e) {
        result.warnings.push_back(std::string("training step aborted: ") + e.what());
      }
      ++result.batches;
      if (hooks.on_checkpoint && config.checkpoint_every_batches > 0 &&
          result.batches % config.checkpoint_every_batches == 0) {
        hooks.on_checkpoint(result.batches);
      }
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = loss_total / static_cast<double>(std::max<std::size_t>(1, steps_total));
    stats.step_accuracy =
        static_cast<double>(correct_total) / static_cast<double>(std::max<std::size_t>(1, steps_total));
    if (!validation.empty()) {
      stats.validation_loss = evaluate_loss(extractor, validation);
      decay.observe(stats.validation_loss, adam);
    }
    stats.lr = adam.lr();
    result.epochs.push_back(stats);
    if (hooks.stop_after && hooks.stop_after(stats)) break;
  }
  return result;
}

double evaluate_loss(Extractor& extractor, std::span<const ExtractorExample> examples) {
  double total = 0.0;
  std::size_t steps = 0;
  for (const auto& ex : examples) {
    if (ex.targets.empty() || ex.doc.empty()) continue;
    Graph g;
    const auto tf = teacher_forced(g, extractor, ex.doc, ex.targets);
    total += g.scalar_value(tf.loss_sum);
    steps += tf.steps;
  }
  return steps == 0 ? 0.0 : total / static_cast<double>(steps);
}

double greedy_step_accuracy(const Extractor& extractor,
                            std::span<const ExtractorExample> examples) {
  std::size_t steps = 0;
  std::size_t correct = 0;
  for (const auto& ex : examples) {
    if (ex.targets.empty() || ex.doc.empty()) continue;
    const auto seq = target_sequence(ex.targets, ex.doc.size(), extractor.config().max_steps);
    auto predicted = extractor.extract(ex.doc).indices;
    if (predicted.size() < ex.doc.size() && predicted.size() < extractor.config().max_steps) {
      predicted.push_back(ex.doc.size());
    }
    for (std::size_t t = 0; t < seq.size(); ++t) {
      if (t < predicted.size() && predicted[t] == seq[t]) ++correct;
    }
    steps += seq.size();
  }
  return steps == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(steps);
}

std::string extraction_json_line(const Extraction& extraction) {
  nlohmann::ordered_json j;
  j["report_id"] = extraction.report_id;
  j["indices"] = extraction.indices;
  j["log_probs"] = extraction.step_log_probs;
  return j.dump();
}

Extraction extraction_from_json_line(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  Extraction e;
  e.report_id = j.at("report_id").get<std::string>();
  e.indices = j.at("indices").get<std::vector<std::size_t>>();
  e.step_log_probs = j.at("log_probs").get<std::vector<double>>();
  return e;
}

}  // namespace narrsum::extractor
