#include "narrsum/abstractor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <utility>

#include "narrsum/checkpoint.hpp"
#include "narrsum/corpus.hpp"
#include "narrsum/optim.hpp"

namespace narrsum::abstractor {

using ad::Expr;
using ad::Graph;

nlohmann::json AbstractorConfig::to_json() const {
  return {{"vocab_size", vocab_size},
          {"embedding_dim", embedding_dim},
          {"hidden", hidden},
          {"attention_dim", attention_dim}};
}

AbstractorConfig AbstractorConfig::from_json(const nlohmann::json& j) {
  AbstractorConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.attention_dim = j.at("attention_dim").get<std::size_t>();
  return c;
}

void DecodeConfig::validate() const {
  if (beam_width < 1) throw std::invalid_argument("beam_width must be >= 1");
  if (!(repetition_penalty >= 1.0)) throw std::invalid_argument("repetition_penalty must be >= 1");
  if (max_output_tokens < 1) throw std::invalid_argument("max_output_tokens must be >= 1");
}

// Graph-bound parameters for one encode/decode.
struct Abstractor::Bound {
  Graph* g;
  const Abstractor* model;
  bool trainable;
  ad::LstmNodes decoder;
  ad::AttentionMemory memory;
  Expr combine_w, combine_b, out_w, out_b;

  Expr param(const ad::Parameter* p) const {
    return trainable ? g->param(*const_cast<ad::Parameter*>(p)) : g->param(*p);
  }
  Expr embed(int token) const {
    const auto row = static_cast<std::size_t>(token);
    return trainable ? g->lookup(*const_cast<ad::Parameter*>(model->embedding_), row)
                     : g->lookup(std::as_const(*model->embedding_), row);
  }
};

struct Abstractor::State {
  ad::LstmState lstm;
  Expr attentional;  // combined hidden fed back as input
};

Abstractor::Abstractor(AbstractorConfig config, std::uint64_t seed) : config_(config) {
  const std::size_t h = config_.hidden;
  embedding_ = &params_.add("embedding", {config_.vocab_size, config_.embedding_dim});
  enc_fwd_ = ad::add_lstm(params_, "enc_fwd", config_.embedding_dim, h);
  enc_bwd_ = ad::add_lstm(params_, "enc_bwd", config_.embedding_dim, h);
  decoder_ = ad::add_lstm(params_, "decoder", config_.embedding_dim + h, h);
  attention_ = ad::add_attention(params_, "attention", 2 * h, h, config_.attention_dim);
  init_w_ = &params_.add("init.weight", {h, 2 * h});
  init_b_ = &params_.add("init.bias", {h, 1});
  combine_w_ = &params_.add("combine.weight", {h, 3 * h});
  combine_b_ = &params_.add("combine.bias", {h, 1});
  out_w_ = &params_.add("output.weight", {config_.vocab_size, h});
  out_b_ = &params_.add("output.bias", {config_.vocab_size, 1});

  std::mt19937_64 rng(seed);
  params_.init_uniform(rng, config_.init_scale);
  for (const auto* lstm : {&enc_fwd_, &enc_bwd_, &decoder_}) ad::init_forget_bias(*lstm, 1.0);
}

std::string Abstractor::config_hash() const { return ad::fnv1a_hex(config_.to_json().dump()); }

namespace {

// Encodes `source` and returns the initial decoder state.
template <typename BoundT, typename StateT>
StateT start(BoundT& b, std::span<const int> source, const ad::LstmWeights& fwd,
             const ad::LstmWeights& bwd, const ad::AttentionWeights& attention,
             const ad::Parameter* init_w, const ad::Parameter* init_b, std::size_t hidden) {
  Graph& g = *b.g;
  std::vector<Expr> words;
  words.reserve(source.size());
  for (int t : source) words.push_back(b.embed(t));
  const auto states =
      ad::bilstm_sequence(g, ad::bind(g, fwd, b.trainable), ad::bind(g, bwd, b.trainable), words);
  std::vector<Expr> keys;
  keys.reserve(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) {
    const Expr parts[] = {states.forward[i], states.backward[i]};
    keys.push_back(g.concat(parts));
  }
  b.memory = ad::prepare_attention(g, attention, keys, b.trainable);
  const Expr ends[] = {states.forward.back(), states.backward.front()};
  StateT s;
  s.lstm.h = g.tanh(g.add(g.matmul(b.param(init_w), g.concat(ends)), b.param(init_b)));
  s.lstm.c = g.zeros({hidden, 1});
  s.attentional = g.zeros({hidden, 1});
  return s;
}

template <typename BoundT, typename StateT>
Expr step(BoundT& b, StateT& s, int previous_token) {
  Graph& g = *b.g;
  const Expr input_parts[] = {b.embed(previous_token), s.attentional};
  s.lstm = ad::lstm_cell(g, b.decoder, g.concat(input_parts), s.lstm);
  const auto att = ad::bahdanau_attention(g, b.memory, s.lstm.h);
  const Expr combine_parts[] = {s.lstm.h, att.context};
  s.attentional =
      g.tanh(g.add(g.matmul(b.combine_w, g.concat(combine_parts)), b.combine_b));
  return g.add(g.matmul(b.out_w, s.attentional), b.out_b);
}

std::vector<bool> decode_mask(std::size_t vocab_size) {
  std::vector<bool> mask(vocab_size, false);
  mask[Vocab::kPad] = true;
  mask[Vocab::kStart] = true;
  return mask;
}

}  // namespace

Abstractor::LossResult Abstractor::teacher_forced(Graph& g, std::span<const int> source,
                                                  std::span<const int> target) {
  if (source.empty()) throw std::invalid_argument("abstractor: empty source sentence");
  Bound b{&g, this, true, ad::bind(g, decoder_, true), {}, {}, {}, {}, {}};
  b.combine_w = b.param(combine_w_);
  b.combine_b = b.param(combine_b_);
  b.out_w = b.param(out_w_);
  b.out_b = b.param(out_b_);
  State s = start<Bound, State>(b, source, enc_fwd_, enc_bwd_, attention_, init_w_, init_b_,
                                config_.hidden);
  LossResult r;
  std::vector<Expr> losses;
  int previous = Vocab::kStart;
  for (std::size_t t = 0; t <= target.size(); ++t) {
    const int gold = t < target.size() ? target[t] : Vocab::kEnd;
    const Expr logits = step(b, s, previous);
    losses.push_back(g.cross_entropy(logits, static_cast<std::size_t>(gold)));
    const auto v = g.value(logits);
    if (std::max_element(v.begin(), v.end()) - v.begin() == gold) ++r.correct;
    ++r.tokens;
    previous = gold;
  }
  r.loss_sum = g.sum(g.concat(losses));
  return r;
}

Hypothesis Abstractor::search(std::span<const int> source, const DecodeConfig& config,
                              std::size_t width) const {
  Graph g;
  Bound b{&g, this, false, ad::bind(g, decoder_, false), {}, {}, {}, {}, {}};
  b.combine_w = b.param(combine_w_);
  b.combine_b = b.param(combine_b_);
  b.out_w = b.param(out_w_);
  b.out_b = b.param(out_b_);
  const State initial = start<Bound, State>(b, source, enc_fwd_, enc_bwd_, attention_, init_w_,
                                            init_b_, config_.hidden);
  const std::vector<bool> mask = decode_mask(config_.vocab_size);
  const double penalty = std::log(config.repetition_penalty);

  struct Live {
    Hypothesis hyp;
    State state;
  };
  struct Candidate {
    std::size_t parent;
    int token;
    double score;
  };
  std::vector<Live> live{{Hypothesis{}, initial}};
  std::vector<Hypothesis> finished;

  for (std::size_t length = 0; length <= config.max_output_tokens && !live.empty(); ++length) {
    std::vector<Candidate> candidates;
    std::vector<State> next_states;
    next_states.reserve(live.size());
    for (std::size_t k = 0; k < live.size(); ++k) {
      State s = live[k].state;
      const int previous = live[k].hyp.tokens.empty() ? Vocab::kStart : live[k].hyp.tokens.back();
      const Expr log_probs = g.log_softmax(step(b, s, previous), mask);
      next_states.push_back(s);
      const auto lp = g.value(log_probs);
      const auto& tokens = live[k].hyp.tokens;
      for (std::size_t v = 0; v < lp.size(); ++v) {
        if (mask[v]) continue;
        const int token = static_cast<int>(v);
        // At the length cap only the end token may be emitted.
        if (length == config.max_output_tokens && token != Vocab::kEnd) continue;
        double s_new = live[k].hyp.score + lp[v];
        if (std::find(tokens.begin(), tokens.end(), token) != tokens.end()) s_new -= penalty;
        candidates.push_back({k, token, s_new});
      }
    }
    const std::size_t keep = std::min(width, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), [](const Candidate& a, const Candidate& c) {
                        if (a.score != c.score) return a.score > c.score;
                        if (a.parent != c.parent) return a.parent < c.parent;
                        return a.token < c.token;
                      });
    std::vector<Live> next;
    for (std::size_t i = 0; i < keep; ++i) {
      const Candidate& c = candidates[i];
      Hypothesis h = live[c.parent].hyp;
      h.score = c.score;
      if (c.token == Vocab::kEnd) {
        h.finished = true;
        finished.push_back(std::move(h));
      } else {
        h.tokens.push_back(c.token);
        next.push_back({std::move(h), next_states[c.parent]});
      }
    }
    live = std::move(next);
    if (!finished.empty() && !live.empty()) {
      const auto best_finished = std::max_element(
          finished.begin(), finished.end(),
          [](const Hypothesis& a, const Hypothesis& c) { return a.score < c.score; });
      const auto best_live = std::max_element(
          live.begin(), live.end(),
          [](const Live& a, const Live& c) { return a.hyp.score < c.hyp.score; });
      // Scores never increase, so no live hypothesis can overtake.
      if (best_finished->score >= best_live->hyp.score) break;
    }
  }

  auto by_score = [](const Hypothesis& a, const Hypothesis& c) { return a.score < c.score; };
  if (!finished.empty()) return *std::max_element(finished.begin(), finished.end(), by_score);
  Hypothesis best;
  best.score = -std::numeric_limits<double>::infinity();
  for (const auto& l : live) {
    if (l.hyp.score > best.score) best = l.hyp;
  }
  return best;
}

Hypothesis Abstractor::decode(std::span<const int> source, const DecodeConfig& config) const {
  config.validate();
  if (source.empty()) throw std::invalid_argument("paraphrase: empty input sentence");
  Hypothesis best = search(source, config, config.beam_width);
  if (config.beam_width > 1) {
    // Keep the greedy path as a candidate so widening never loses to it.
    const Hypothesis greedy = search(source, config, 1);
    if (greedy.finished == best.finished && greedy.score > best.score) best = greedy;
    if (greedy.finished && !best.finished) best = greedy;
  }
  return best;
}

std::vector<int> Abstractor::paraphrase(std::span<const int> source,
                                        const DecodeConfig& config) const {
  return decode(source, config).tokens;
}

double Abstractor::score_sequence(std::span<const int> source, std::span<const int> tokens,
                                  double repetition_penalty, bool finished) const {
  if (source.empty()) throw std::invalid_argument("score_sequence: empty input sentence");
  Graph g;
  Bound b{&g, this, false, ad::bind(g, decoder_, false), {}, {}, {}, {}, {}};
  b.combine_w = b.param(combine_w_);
  b.combine_b = b.param(combine_b_);
  b.out_w = b.param(out_w_);
  b.out_b = b.param(out_b_);
  State s = start<Bound, State>(b, source, enc_fwd_, enc_bwd_, attention_, init_w_, init_b_,
                                config_.hidden);
  const std::vector<bool> mask = decode_mask(config_.vocab_size);
  const double penalty = std::log(repetition_penalty);
  double score = 0.0;
  int previous = Vocab::kStart;
  const std::size_t steps = tokens.size() + (finished ? 1 : 0);
  for (std::size_t t = 0; t < steps; ++t) {
    const int token = t < tokens.size() ? tokens[t] : Vocab::kEnd;
    const auto lp = g.value(g.log_softmax(step(b, s, previous), mask));
    score += lp[static_cast<std::size_t>(token)];
    if (std::find(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(t), token) !=
        tokens.begin() + static_cast<std::ptrdiff_t>(t)) {
      score -= penalty;
    }
    previous = token;
  }
  return score;
}

TrainResult train_abstractor(Abstractor& model, std::span<const Pair> training,
                             std::span<const Pair> validation, const TrainConfig& config,
                             const TrainHooks& hooks) {
  TrainResult result;
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < training.size(); ++i) {
    if (training[i].target.empty() || training[i].source.empty()) {
      result.warnings.push_back("pair " + std::to_string(i) + " has an empty side; skipped");
      continue;
    }
    usable.push_back(i);
  }
  if (usable.empty()) return result;

  ad::Adam adam(model.params(), {.lr = config.lr});
  ad::PlateauDecay decay(config.lr_decay);
  std::mt19937_64 rng(config.seed);
  const std::size_t batch_size = std::max<std::size_t>(1, config.batch_size);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(usable.begin(), usable.end(), rng);
    double loss_total = 0.0;
    std::size_t tokens_total = 0;
    std::size_t correct_total = 0;
    for (std::size_t begin = 0; begin < usable.size(); begin += batch_size) {
      const std::size_t end = std::min(usable.size(), begin + batch_size);
      std::size_t batch_tokens = 0;
      for (std::size_t k = begin; k < end; ++k) batch_tokens += training[usable[k]].target.size() + 1;
      for (std::size_t k = begin; k < end; ++k) {
        const Pair& p = training[usable[k]];
        Graph g;
        const auto r = model.teacher_forced(g, p.source, p.target);
        g.backward(g.scale(r.loss_sum, 1.0 / static_cast<double>(batch_tokens)));
        loss_total += g.scalar_value(r.loss_sum);
        tokens_total += r.tokens;
        correct_total += r.correct;
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
    stats.mean_loss = loss_total / static_cast<double>(std::max<std::size_t>(1, tokens_total));
    stats.token_accuracy = static_cast<double>(correct_total) /
                           static_cast<double>(std::max<std::size_t>(1, tokens_total));
    if (!validation.empty()) {
      stats.validation_loss = evaluate(model, validation).first;
      decay.observe(stats.validation_loss, adam);
    }
    stats.lr = adam.lr();
    result.epochs.push_back(stats);
    if (hooks.stop_after && hooks.stop_after(stats)) break;
  }
  return result;
}

std::pair<double, double> evaluate(Abstractor& model, std::span<const Pair> pairs) {
  double loss = 0.0;
  std::size_t tokens = 0;
  std::size_t correct = 0;
  for (const Pair& p : pairs) {
    if (p.source.empty() || p.target.empty()) continue;
    Graph g;
    const auto r = model.teacher_forced(g, p.source, p.target);
    loss += g.scalar_value(r.loss_sum);
    tokens += r.tokens;
    correct += r.correct;
  }
  if (tokens == 0) return {0.0, 0.0};
  return {loss / static_cast<double>(tokens),
          static_cast<double>(correct) / static_cast<double>(tokens)};
}

}  // namespace narrsum::abstractor
