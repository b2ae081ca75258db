#include "narrsum/rl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "narrsum/optim.hpp"
#include "narrsum/rouge.hpp"

namespace narrsum::rl {

using ad::Expr;
using ad::Graph;

double compute_reward(std::span<const std::string> generated, std::span<const std::string> target) {
  return rouge::rouge_l_sentence(generated, target).f1;
}

double Trajectory::total_reward() const {
  double total = 0.0;
  for (const Step& s : steps) total += s.reward;
  return total;
}

std::vector<std::size_t> Trajectory::chosen() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (!(stopped && i + 1 == steps.size())) out.push_back(steps[i].action);
  }
  return out;
}

std::vector<double> returns_to_go(std::span<const double> rewards) {
  std::vector<double> out(rewards.size(), 0.0);
  double running = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    running += rewards[i];
    out[i] = running;
  }
  return out;
}

void normalize_advantages(std::span<double> advantages) {
  if (advantages.empty()) return;
  double sq = 0.0;
  for (double a : advantages) sq += a * a;
  const double rms = std::sqrt(sq / static_cast<double>(advantages.size()));
  if (!(rms > 1e-12)) return;
  for (double& a : advantages) a /= rms;
}

TokenList VocabRewriter::rewrite(std::span<const int> sentence) { return vocab_.decode(sentence); }

TokenList AbstractorRewriter::rewrite(std::span<const int> sentence) {
  std::vector<int> key(sentence.begin(), sentence.end());
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  TokenList out = vocab_.decode(model_.paraphrase(sentence, decode_));
  cache_.emplace(std::move(key), out);
  return out;
}

Critic::Critic(std::size_t state_dim, std::uint64_t seed, double init_scale) {
  weight_ = &params_.add("value.weight", {1, state_dim});
  bias_ = &params_.add("value.bias", {1, 1});
  std::mt19937_64 rng(seed);
  params_.init_uniform(rng, init_scale);
}

Expr Critic::value(Graph& g, Expr state) {
  return g.add(g.matmul(g.param(*weight_), state), g.param(*bias_));
}

namespace {

std::size_t sample_index(std::span<const double> log_probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double u = uniform(rng);
  double cumulative = 0.0;
  std::size_t last = log_probs.size();
  for (std::size_t i = 0; i < log_probs.size(); ++i) {
    if (!std::isfinite(log_probs[i])) continue;
    cumulative += std::exp(log_probs[i]);
    last = i;
    if (u < cumulative) return i;
  }
  return last;
}

std::size_t argmax_finite(std::span<const double> values) {
  std::size_t best = values.size();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) continue;
    if (best == values.size() || values[i] > values[best]) best = i;
  }
  return best;
}

double summary_f1(std::span<const TokenList> generated, std::span<const TokenList> gold) {
  return rouge::rouge_l_summary(generated, gold).f1;
}

}  // namespace

Rollout rollout(const Episode& episode, extractor::Extractor& policy, Critic& critic,
                Rewriter& rewriter, Mode mode, std::mt19937_64& rng, bool with_entropy) {
  if (episode.doc.empty()) throw std::invalid_argument("rollout: empty document");
  Rollout out;
  Graph& g = out.graph;
  out.trajectory.report_id = episode.report_id;
  extractor::PointerSession session(g, policy, episode.doc);
  std::vector<TokenList> generated;

  while (!session.finished() && generated.size() < episode.gold.size()) {
    const Expr scores = session.scores();
    const Expr value = critic.value(g, g.detach(session.decoder_state()));
    const Expr log_probs = g.log_softmax(scores, session.mask());
    const auto lp = g.value(log_probs);
    const std::size_t action = mode == Mode::kSample ? sample_index(lp, rng) : argmax_finite(lp);

    Step step;
    step.action = action;
    step.log_prob = lp[action];
    step.value = g.scalar_value(value);
    if (action == session.stop_index()) {
      // Marginal summary-level F1 of the last generated sentence.
      if (!generated.empty()) {
        const double all = summary_f1(generated, episode.gold);
        const double before =
            summary_f1(std::span<const TokenList>(generated).first(generated.size() - 1),
                       episode.gold);
        step.reward = std::clamp(all - before, 0.0, 1.0);
      }
      out.trajectory.stopped = true;
    } else {
      generated.push_back(rewriter.rewrite(episode.doc[action]));
      step.reward = compute_reward(generated.back(), episode.gold[generated.size() - 1]);
    }
    out.log_probs.push_back(g.pick(log_probs, action));
    if (with_entropy) {
      std::vector<Expr> open;
      for (std::size_t i = 0; i < lp.size(); ++i) {
        if (std::isfinite(lp[i])) open.push_back(g.pick(log_probs, i));
      }
      const Expr open_lp = g.concat(open);
      out.entropies.push_back(g.scale(g.sum(g.mul(g.softmax(open_lp), open_lp)), -1.0));
    }
    out.values.push_back(value);
    out.trajectory.steps.push_back(step);
    session.choose(action);
  }

  std::vector<double> rewards;
  for (const Step& s : out.trajectory.steps) rewards.push_back(s.reward);
  out.trajectory.returns = returns_to_go(rewards);
  return out;
}

Expr policy_loss(Graph& g, std::span<const Expr> log_probs, std::span<const double> advantages) {
  if (log_probs.size() != advantages.size()) {
    throw std::invalid_argument("policy_loss: size mismatch");
  }
  if (log_probs.empty()) return g.scalar(0.0);
  const Expr stacked = g.concat(log_probs);
  const Expr weights = g.constant({advantages.size(), 1}, {advantages.begin(), advantages.end()});
  return g.scale(g.sum(g.mul(stacked, weights)), -1.0);
}

Expr critic_loss(Graph& g, std::span<const Expr> values, std::span<const double> returns) {
  if (values.size() != returns.size()) throw std::invalid_argument("critic_loss: size mismatch");
  if (values.empty()) return g.scalar(0.0);
  const Expr diff =
      g.sub(g.concat(values), g.constant({returns.size(), 1}, {returns.begin(), returns.end()}));
  return g.sum(g.mul(diff, diff));
}

A2cUpdater::A2cUpdater(extractor::Extractor& policy, Critic& critic, const A2cConfig& config)
    : policy_(policy),
      critic_(critic),
      config_(config),
      policy_opt_(policy.params(), {.lr = config.lr}),
      critic_opt_(critic.params(), {.lr = config.critic_lr}) {}

UpdateStats A2cUpdater::update(std::span<Rollout> batch) {
  if (batch.empty()) throw std::invalid_argument("a2c_update: empty batch");
  UpdateStats stats;
  stats.trajectories = batch.size();

  std::vector<std::vector<double>> advantages(batch.size());
  std::vector<double> flat;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const Trajectory& t = batch[k].trajectory;
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
      advantages[k].push_back(t.returns[i] - t.steps[i].value);
    }
    flat.insert(flat.end(), advantages[k].begin(), advantages[k].end());
    stats.mean_reward += t.total_reward();
  }
  stats.mean_reward /= static_cast<double>(batch.size());
  if (!flat.empty()) {
    stats.mean_advantage =
        std::accumulate(flat.begin(), flat.end(), 0.0) / static_cast<double>(flat.size());
  }
  if (std::any_of(flat.begin(), flat.end(), [](double a) { return !std::isfinite(a); })) {
    stats.discarded = true;
    stats.diagnostic = "non-finite advantage; batch discarded";
    return stats;
  }
  if (config_.normalize_advantages) {
    normalize_advantages(flat);
    std::size_t offset = 0;
    for (auto& adv : advantages) {
      std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), adv.size(), adv.begin());
      offset += adv.size();
    }
  }

  policy_opt_.zero_grad();
  critic_opt_.zero_grad();
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    Rollout& r = batch[k];
    if (r.log_probs.empty()) continue;
    Graph& g = r.graph;
    const Expr closs = critic_loss(g, r.values, r.trajectory.returns);
    stats.critic_loss += g.scalar_value(closs);
    Expr loss = g.add(policy_loss(g, r.log_probs, advantages[k]), closs);
    if (config_.entropy_weight != 0.0 && !r.entropies.empty()) {
      loss = g.sub(loss, g.scale(g.sum(g.concat(r.entropies)), config_.entropy_weight));
    }
    g.backward(g.scale(loss, scale));
  }
  stats.critic_loss /= static_cast<double>(batch.size());

  try {
    ad::clipped_step(policy_opt_, config_.clip_norm);
    ad::clipped_step(critic_opt_, config_.clip_norm);
  } catch (const ad::NonFiniteGradient& e) {
    policy_opt_.zero_grad();
    critic_opt_.zero_grad();
    stats.discarded = true;
    stats.diagnostic = std::string("non-finite gradient; batch discarded: ") + e.what();
  }
  return stats;
}

RlResult train_rl(std::span<const Episode> episodes, extractor::Extractor& policy, Critic& critic,
                  Rewriter& rewriter, const RlConfig& config) {
  if (episodes.empty()) throw std::invalid_argument("train_rl: no episodes");
  RlResult result;
  A2cUpdater updater(policy, critic, config.a2c);
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick(0, episodes.size() - 1);
  const std::size_t batch_size = std::max<std::size_t>(1, config.batch_size);

  std::size_t consumed = 0;
  while (consumed < config.episodes) {
    const std::size_t n = std::min(batch_size, config.episodes - consumed);
    std::vector<Rollout> batch;
    batch.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      batch.push_back(rollout(episodes[pick(rng)], policy, critic, rewriter, Mode::kSample, rng,
                                    config.a2c.entropy_weight != 0.0));
    }
    consumed += n;
    const UpdateStats stats = updater.update(batch);
    if (stats.discarded) result.warnings.push_back(stats.diagnostic);
    result.curve.push_back({consumed, stats.mean_reward, stats.mean_advantage, stats.critic_loss});
  }
  return result;
}

double mean_greedy_reward(std::span<const Episode> episodes, extractor::Extractor& policy,
                          Critic& critic, Rewriter& rewriter) {
  if (episodes.empty()) return 0.0;
  std::mt19937_64 rng(0);
  double total = 0.0;
  for (const Episode& e : episodes) {
    const Rollout r = rollout(e, policy, critic, rewriter, Mode::kGreedy, rng);
    total += r.trajectory.total_reward() /
             static_cast<double>(std::max<std::size_t>(1, e.gold.size()));
  }
  return total / static_cast<double>(episodes.size());
}

void write_curve_csv(const std::filesystem::path& path, std::span<const CurveRow> curve) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "episode,mean_reward,mean_advantage,critic_loss\n";
  out.precision(10);
  for (const CurveRow& r : curve) {
    out << r.episode << ',' << r.mean_reward << ',' << r.mean_advantage << ',' << r.critic_loss
        << '\n';
  }
}

}  // namespace narrsum::rl
