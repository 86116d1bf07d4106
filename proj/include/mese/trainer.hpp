// Copyright 2026 The MESE Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MESE_TRAINER_HPP_
#define MESE_TRAINER_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mese/entropy.hpp"
#include "mese/error.hpp"
#include "mese/index_set.hpp"
#include "mese/intrinsic.hpp"
#include "mese/nn.hpp"
#include "mese/pushbox.hpp"
#include "mese/rng.hpp"
#include "mese/subspace.hpp"

namespace mese {

enum class Variant { kNone, kRnd, kMese };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kNone:
      return "none";
    case Variant::kRnd:
      return "rnd";
    case Variant::kMese:
      return "mese";
  }
  return "?";
}

inline std::optional<Variant> parse_variant(const std::string& s) {
  if (s == "none") return Variant::kNone;
  if (s == "rnd") return Variant::kRnd;
  if (s == "mese") return Variant::kMese;
  return std::nullopt;
}

struct TrainConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  std::size_t epochs = 4;
  std::size_t minibatch_size = 256;  // timesteps per minibatch
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  double entropy_coef = 0.01;
  std::size_t episodes_per_update = 10;
  std::size_t total_episodes = 20000;
  std::size_t subspace_interval = 10;  // M
  std::size_t window_cap = 4096;       // rows kept for diversity / predictor
  std::vector<std::size_t> hidden{64, 64};
  bool share_actor = true;
  EntropyConfig entropy{};
  std::uint64_t seed = 1;

  void validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("train.gamma", "must lie in [0, 1)");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) {
      throw ConfigError("train.gae_lambda", "must lie in [0, 1]");
    }
    if (!(clip > 0.0 && clip < 1.0)) throw ConfigError("train.clip", "must lie in (0, 1)");
    if (epochs == 0) throw ConfigError("train.epochs", "must be >= 1");
    if (minibatch_size == 0) throw ConfigError("train.minibatch_size", "must be >= 1");
    if (!(actor_lr > 0.0)) throw ConfigError("train.actor_lr", "must be > 0");
    if (!(critic_lr > 0.0)) throw ConfigError("train.critic_lr", "must be > 0");
    if (!(entropy_coef >= 0.0)) throw ConfigError("train.entropy_coef", "must be >= 0");
    if (episodes_per_update == 0) throw ConfigError("train.episodes_per_update", "must be >= 1");
    if (total_episodes == 0) throw ConfigError("train.total_episodes", "must be >= 1");
    if (subspace_interval == 0) throw ConfigError("train.subspace_interval", "must be >= 1");
    if (window_cap < 2) throw ConfigError("train.window_cap", "must be >= 2");
    if (entropy.k == 0) throw ConfigError("train.knn_k", "must be >= 1");
    if (!(entropy.epsilon_floor > 0.0)) throw ConfigError("train.epsilon_floor", "must be > 0");
    if (hidden.empty()) throw ConfigError("train.hidden", "needs at least one layer");
  }
};

// Decentralized actors (observation -> action logits) and a centralized critic
// (global state -> value). With sharing on there is a single actor.
struct PolicySet {
  std::vector<nn::MlpParams> actors;
  std::vector<nn::AdamState> actor_adam;
  nn::MlpParams critic;
  nn::AdamState critic_adam;

  const nn::MlpParams& actor_for(std::size_t agent) const {
    return actors.size() == 1 ? actors.front() : actors.at(agent);
  }
};

inline PolicySet make_policies(std::size_t obs_dim, std::size_t state_dim, std::size_t n_agents,
                               const TrainConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  PolicySet p;
  std::vector<std::size_t> actor_sizes{obs_dim};
  actor_sizes.insert(actor_sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  actor_sizes.push_back(pushbox::kNumActions);
  const std::size_t n_actors = cfg.share_actor ? 1 : n_agents;
  for (std::size_t i = 0; i < n_actors; ++i) {
    p.actors.push_back(nn::make_mlp(actor_sizes, nn::Activation::kTanh, rng));
    p.actor_adam.push_back(nn::AdamState::for_params(p.actors.back(), {.lr = cfg.actor_lr}));
  }
  std::vector<std::size_t> critic_sizes{state_dim};
  critic_sizes.insert(critic_sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  critic_sizes.push_back(1);
  p.critic = nn::make_mlp(critic_sizes, nn::Activation::kTanh, rng);
  p.critic_adam = nn::AdamState::for_params(p.critic, {.lr = cfg.critic_lr});
  return p;
}

// Column-wise log-softmax.
inline Eigen::MatrixXd log_softmax(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const double m = logits.col(c).maxCoeff();
    const double lse = m + std::log((logits.col(c).array() - m).exp().sum());
    out.col(c) = logits.col(c).array() - lse;
  }
  return out;
}

struct RolloutStep {
  std::vector<double> state;
  std::vector<std::vector<double>> obs;  // per agent
  std::vector<int> actions;
  std::vector<double> log_probs;
  double extrinsic = 0.0;
  double intrinsic = 0.0;
  double reward = 0.0;  // extrinsic + intrinsic; what PPO optimizes
  double value = 0.0;
  bool done = false;
  bool truncated = false;
  std::vector<double> next_state;
  // Value used after this step when it ends an episode: 0 at the goal, the
  // critic's estimate of next_state at a timeout.
  double bootstrap = 0.0;
};

struct RolloutBatch {
  std::vector<RolloutStep> steps;
  std::vector<std::size_t> episode_starts;
  std::vector<bool> successes;

  std::size_t n_episodes() const { return episode_starts.size(); }
  std::size_t episode_end(std::size_t e) const {
    return e + 1 < episode_starts.size() ? episode_starts[e + 1] : steps.size();
  }
  void append(RolloutBatch&& other) {
    const std::size_t base = steps.size();
    for (std::size_t s : other.episode_starts) episode_starts.push_back(base + s);
    successes.insert(successes.end(), other.successes.begin(), other.successes.end());
    steps.insert(steps.end(), std::make_move_iterator(other.steps.begin()),
                 std::make_move_iterator(other.steps.end()));
  }
};

enum class ActionMode { kSample, kGreedy };

// Plays `n_episodes` episodes. Sampled actions come from each actor's
// categorical distribution; greedy mode takes the argmax (lowest index on
// ties). Rewards in the returned batch are extrinsic only.
inline RolloutBatch collect_rollout(const PolicySet& policies, const pushbox::PushBox& env,
                                    std::size_t n_episodes, Rng& rng,
                                    ActionMode mode = ActionMode::kSample) {
  const auto n_agents = static_cast<std::size_t>(env.config().n_agents);
  const std::size_t dim = env.state_dim();
  RolloutBatch batch;
  std::vector<pushbox::Direction> joint(n_agents);
  Eigen::MatrixXd obs_cols(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(n_agents));
  Eigen::MatrixXd state_col(static_cast<Eigen::Index>(dim), 1);
  auto fill = [](Eigen::MatrixXd& m, Eigen::Index col, const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), col) = v[i];
  };
  for (std::size_t e = 0; e < n_episodes; ++e) {
    batch.episode_starts.push_back(batch.steps.size());
    pushbox::GridState state = env.reset(rng.next());
    bool success = false;
    for (;;) {
      RolloutStep step;
      step.state = env.encode_state(state);
      for (std::size_t a = 0; a < n_agents; ++a) {
        step.obs.push_back(env.observe(state, static_cast<int>(a)));
        fill(obs_cols, static_cast<Eigen::Index>(a), step.obs.back());
      }
      Eigen::MatrixXd logp;
      if (policies.actors.size() == 1) {
        logp = log_softmax(nn::forward_batch(policies.actors.front(), obs_cols));
      } else {
        logp.resize(pushbox::kNumActions, static_cast<Eigen::Index>(n_agents));
        for (std::size_t a = 0; a < n_agents; ++a) {
          const auto col = static_cast<Eigen::Index>(a);
          logp.col(col) = log_softmax(nn::forward_batch(policies.actors[a], obs_cols.col(col)));
        }
      }
      for (std::size_t a = 0; a < n_agents; ++a) {
        const auto col = static_cast<Eigen::Index>(a);
        Eigen::Index choice = 0;
        if (mode == ActionMode::kGreedy) {
          logp.col(col).maxCoeff(&choice);
        } else {
          const double u = rng.uniform();
          double cumulative = 0.0;
          choice = logp.rows() - 1;
          for (Eigen::Index k = 0; k < logp.rows(); ++k) {
            cumulative += std::exp(logp(k, col));
            if (u < cumulative) {
              choice = k;
              break;
            }
          }
        }
        step.actions.push_back(static_cast<int>(choice));
        step.log_probs.push_back(logp(choice, col));
        joint[a] = static_cast<pushbox::Direction>(choice);
      }
      fill(state_col, 0, step.state);
      step.value = nn::forward_batch(policies.critic, state_col)(0, 0);
      pushbox::StepResult result = env.step(state, joint);
      step.extrinsic = result.reward;
      step.reward = result.reward;
      step.done = result.done;
      step.truncated = result.truncated;
      step.next_state = env.encode_state(result.state);
      if (result.truncated) {
        fill(state_col, 0, step.next_state);
        step.bootstrap = nn::forward_batch(policies.critic, state_col)(0, 0);
      }
      success = result.done && !result.truncated;
      batch.steps.push_back(std::move(step));
      state = std::move(result.state);
      if (result.done) break;
    }
    batch.successes.push_back(success);
  }
  return batch;
}

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// Generalized advantage estimation. dones[t] marks the last step of an
// episode; the value following such a step is bootstrap[t] (or 0 when no
// bootstrap values are given). returns = advantages + values.
inline GaeResult gae_advantages(std::span<const double> rewards, std::span<const double> values,
                                const std::vector<bool>& dones, double gamma, double lambda,
                                std::span<const double> bootstrap = {}) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n || (!bootstrap.empty() && bootstrap.size() != n)) {
    throw ShapeError("GAE inputs have mismatched lengths");
  }
  GaeResult out{std::vector<double>(n), std::vector<double>(n)};
  double running = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const bool last = dones[t] || t + 1 == n;
    const double next_value =
        last ? (bootstrap.empty() ? 0.0 : bootstrap[t]) : values[t + 1];
    const double delta = rewards[t] + gamma * next_value - values[t];
    running = delta + (last ? 0.0 : gamma * lambda * running);
    out.advantages[t] = running;
    out.returns[t] = running + values[t];
  }
  return out;
}

struct LossAndGrad {
  double loss = 0.0;
  nn::Gradients grad;
  double entropy = 0.0;        // mean policy entropy
  double max_ratio_dev = 0.0;  // max |ratio - 1|
};

// Clipped-surrogate actor loss with entropy bonus, averaged over columns:
//   -mean(min(r A, clip(r, 1-eps, 1+eps) A)) - c * mean(H(pi))
inline LossAndGrad actor_loss(const nn::MlpParams& actor, const Eigen::MatrixXd& obs,
                              std::span<const int> actions, std::span<const double> old_log_probs,
                              std::span<const double> advantages, double clip,
                              double entropy_coef) {
  const auto b = obs.cols();
  if (static_cast<std::size_t>(b) != actions.size() || actions.size() != old_log_probs.size() ||
      actions.size() != advantages.size()) {
    throw ShapeError("actor loss inputs have mismatched lengths");
  }
  const nn::ForwardCache cache = nn::forward_cached(actor, obs);
  const Eigen::MatrixXd logp = log_softmax(cache.output());
  const Eigen::MatrixXd probs = logp.array().exp();
  Eigen::MatrixXd upstream(logp.rows(), b);
  LossAndGrad out;
  const double inv_b = 1.0 / static_cast<double>(b);
  double surrogate_sum = 0.0;
  double entropy_sum = 0.0;
  for (Eigen::Index c = 0; c < b; ++c) {
    const auto i = static_cast<std::size_t>(c);
    const Eigen::Index a = actions[i];
    const double ratio = std::exp(logp(a, c) - old_log_probs[i]);
    const double adv = advantages[i];
    const double unclipped = ratio * adv;
    const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * adv;
    surrogate_sum += std::min(unclipped, clipped);
    out.max_ratio_dev = std::max(out.max_ratio_dev, std::abs(ratio - 1.0));
    const double h = -(probs.col(c).array() * logp.col(c).array()).sum();
    entropy_sum += h;
    // d(-surrogate)/d(log pi(a)); zero when the clipped branch is active.
    const double g_logp = unclipped <= clipped ? -adv * ratio : 0.0;
    for (Eigen::Index k = 0; k < logp.rows(); ++k) {
      const double onehot = k == a ? 1.0 : 0.0;
      const double g_entropy = entropy_coef * probs(k, c) * (logp(k, c) + h);
      upstream(k, c) = (g_logp * (onehot - probs(k, c)) + g_entropy) * inv_b;
    }
  }
  out.entropy = entropy_sum * inv_b;
  out.loss = -surrogate_sum * inv_b - entropy_coef * out.entropy;
  out.grad = nn::backward_batch(actor, cache, upstream);
  return out;
}

// Mean squared error of the critic against return targets.
inline LossAndGrad critic_loss(const nn::MlpParams& critic, const Eigen::MatrixXd& states,
                               std::span<const double> returns) {
  if (static_cast<std::size_t>(states.cols()) != returns.size()) {
    throw ShapeError("critic loss inputs have mismatched lengths");
  }
  const nn::ForwardCache cache = nn::forward_cached(critic, states);
  const Eigen::Map<const Eigen::RowVectorXd> target(returns.data(),
                                                    static_cast<Eigen::Index>(returns.size()));
  const Eigen::RowVectorXd diff = cache.output().row(0) - target;
  const double inv_b = 1.0 / static_cast<double>(returns.size());
  LossAndGrad out;
  out.loss = diff.squaredNorm() * inv_b;
  out.grad = nn::backward_batch(critic, cache, (2.0 * inv_b) * diff);
  return out;
}

struct PpoStats {
  double actor_loss = 0.0;   // mean over minibatches
  double critic_loss = 0.0;  // mean over minibatches
  double entropy = 0.0;
  // Max |ratio - 1| on the first minibatch of the first epoch, before any
  // parameter changed; 0 up to rounding.
  double first_ratio_dev = 0.0;
  std::size_t minibatches = 0;
};

// Clipped PPO over the batch. Advantages are standardized here; the critic
// regresses onto `returns`.
inline PpoStats ppo_update(PolicySet& policies, const RolloutBatch& batch,
                           std::span<const double> advantages, std::span<const double> returns,
                           const TrainConfig& cfg, Rng& rng) {
  const std::size_t n = batch.steps.size();
  if (n == 0) throw ArgumentError("PPO update on an empty batch");
  if (advantages.size() != n || returns.size() != n) {
    throw ShapeError("advantages/returns do not match the rollout length");
  }
  const std::size_t n_agents = batch.steps.front().actions.size();
  const std::size_t obs_dim = batch.steps.front().obs.front().size();
  const std::size_t state_dim = batch.steps.front().state.size();

  double mean = 0.0;
  for (double a : advantages) mean += a;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double a : advantages) var += (a - mean) * (a - mean);
  const double std = std::sqrt(var / static_cast<double>(n));
  // A batch whose advantages agree up to rounding carries no signal; without
  // this cut the 1e-8 guard would turn rounding noise into full Adam steps.
  const bool flat = std <= 1e-12 * std::max(1.0, std::abs(mean));
  std::vector<double> norm_adv(n, 0.0);
  if (!flat) {
    for (std::size_t t = 0; t < n; ++t) norm_adv[t] = (advantages[t] - mean) / (std + 1e-8);
  }

  std::vector<std::size_t> order(n);
  for (std::size_t t = 0; t < n; ++t) order[t] = t;

  PpoStats stats;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < n; start += cfg.minibatch_size) {
      const std::size_t end = std::min(n, start + cfg.minibatch_size);
      const std::size_t m = end - start;
      const bool first = epoch == 0 && start == 0;

      Eigen::MatrixXd states(static_cast<Eigen::Index>(state_dim), static_cast<Eigen::Index>(m));
      std::vector<double> targets(m);
      for (std::size_t i = 0; i < m; ++i) {
        const RolloutStep& s = batch.steps[order[start + i]];
        for (std::size_t j = 0; j < state_dim; ++j) {
          states(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = s.state[j];
        }
        targets[i] = returns[order[start + i]];
      }
      LossAndGrad critic = critic_loss(policies.critic, states, targets);
      if (!std::isfinite(critic.loss)) throw TrainingError("non-finite critic loss");
      nn::adam_step(policies.critic, critic.grad, policies.critic_adam);
      stats.critic_loss += critic.loss;

      // One actor batch per parameter set: with sharing, every agent's samples.
      const std::size_t n_actors = policies.actors.size();
      double actor_total = 0.0;
      double entropy_total = 0.0;
      for (std::size_t p = 0; p < n_actors; ++p) {
        const std::size_t per_step = n_actors == 1 ? n_agents : 1;
        const std::size_t cols = m * per_step;
        Eigen::MatrixXd obs(static_cast<Eigen::Index>(obs_dim), static_cast<Eigen::Index>(cols));
        std::vector<int> actions(cols);
        std::vector<double> old_logp(cols);
        std::vector<double> adv(cols);
        std::size_t c = 0;
        for (std::size_t i = 0; i < m; ++i) {
          const std::size_t t = order[start + i];
          const RolloutStep& s = batch.steps[t];
          for (std::size_t a = 0; a < n_agents; ++a) {
            if (n_actors != 1 && a != p) continue;
            for (std::size_t j = 0; j < obs_dim; ++j) {
              obs(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)) = s.obs[a][j];
            }
            actions[c] = s.actions[a];
            old_logp[c] = s.log_probs[a];
            adv[c] = norm_adv[t];
            ++c;
          }
        }
        LossAndGrad actor = actor_loss(policies.actors[p], obs, actions, old_logp, adv, cfg.clip,
                                       cfg.entropy_coef);
        if (!std::isfinite(actor.loss)) throw TrainingError("non-finite actor loss");
        if (first) stats.first_ratio_dev = std::max(stats.first_ratio_dev, actor.max_ratio_dev);
        nn::adam_step(policies.actors[p], actor.grad, policies.actor_adam[p]);
        actor_total += actor.loss;
        entropy_total += actor.entropy;
      }
      stats.actor_loss += actor_total / static_cast<double>(n_actors);
      stats.entropy += entropy_total / static_cast<double>(n_actors);
      ++stats.minibatches;
    }
  }
  const double k = static_cast<double>(stats.minibatches);
  stats.actor_loss /= k;
  stats.critic_loss /= k;
  stats.entropy /= k;
  return stats;
}

// Advantages and returns for a batch, computed from each step's `reward`.
inline GaeResult batch_advantages(const RolloutBatch& batch, const TrainConfig& cfg) {
  const std::size_t n = batch.steps.size();
  std::vector<double> rewards(n), values(n), bootstrap(n);
  std::vector<bool> dones(n);
  for (std::size_t t = 0; t < n; ++t) {
    const RolloutStep& s = batch.steps[t];
    rewards[t] = s.reward;
    values[t] = s.value;
    dones[t] = s.done;
    bootstrap[t] = s.bootstrap;
  }
  return gae_advantages(rewards, values, dones, cfg.gamma, cfg.gae_lambda, bootstrap);
}

// Seed stream identifiers; each consumer of randomness in a run draws from
// its own stream so that, e.g., enabling intrinsic rewards does not perturb
// action sampling.
namespace streams {
inline constexpr std::uint64_t kRollout = 1;
inline constexpr std::uint64_t kPpo = 2;
inline constexpr std::uint64_t kWindow = 3;
inline constexpr std::uint64_t kPolicyInit = 4;
inline constexpr std::uint64_t kRndInit = 5;
}  // namespace streams

struct RunSpec {
  pushbox::EnvConfig env;
  TrainConfig train;
  IntrinsicConfig intrinsic;
  Variant variant = Variant::kMese;
};

struct EpisodeMetrics {
  std::size_t episode = 0;  // 1-based
  double extrinsic_return = 0.0;
  double reshaped_return = 0.0;
  bool success = false;
  std::size_t steps = 0;
  double mean_intrinsic = 0.0;
  double max_intrinsic = 0.0;
  IndexSet mask;
  double predictor_loss = 0.0;
  double actor_loss = 0.0;   // from the latest PPO update
  double critic_loss = 0.0;  // from the latest PPO update
};

struct MaskEvent {
  std::size_t episode = 0;
  IndexSet previous;  // empty before the root is chosen
  IndexSet chosen;
  std::vector<IndexSet> candidates;
  std::vector<Diversity> diversities;
};

struct TrainHooks {
  std::function<void(const EpisodeMetrics&)> on_episode;
  std::function<void(const MaskEvent&)> on_mask;
  std::function<void(const PpoStats&)> on_update;
};

struct TrainResult {
  PolicySet policies;
  std::optional<RndPair> rnd;
  IndexSet mask;
  std::size_t episodes = 0;
};

namespace detail {

inline void require_finite(const EpisodeMetrics& m) {
  const double values[] = {m.extrinsic_return, m.reshaped_return, m.mean_intrinsic,
                           m.max_intrinsic,    m.predictor_loss,  m.actor_loss,
                           m.critic_loss};
  const char* names[] = {"extrinsic_return", "reshaped_return", "mean_intrinsic",
                         "max_intrinsic",    "predictor_loss",  "actor_loss",
                         "critic_loss"};
  for (std::size_t i = 0; i < std::size(values); ++i) {
    if (!std::isfinite(values[i])) {
      throw TrainingError(std::string("non-finite metric ") + names[i] + " at episode " +
                          std::to_string(m.episode));
    }
  }
}

// Last-M-episodes window of full next-states, subsampled to `cap` rows.
inline SampleBatch window_batch(const std::deque<SampleBatch>& window, std::size_t cap,
                                Rng& rng) {
  std::size_t rows = 0;
  for (const SampleBatch& b : window) rows += b.rows();
  const std::size_t dims = window.front().dims();
  std::vector<double> data;
  data.reserve(rows * dims);
  for (const SampleBatch& b : window) data.insert(data.end(), b.data().begin(), b.data().end());
  SampleBatch all(rows, dims, std::move(data));
  if (rows <= cap) return all;
  std::vector<std::size_t> idx(rows);
  for (std::size_t i = 0; i < rows; ++i) idx[i] = i;
  for (std::size_t i = 0; i < cap; ++i) std::swap(idx[i], idx[i + rng.below(rows - i)]);
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  SampleBatch out(cap, dims);
  for (std::size_t i = 0; i < cap; ++i) {
    std::copy(all.row(idx[i]).begin(), all.row(idx[i]).end(), out.row(i).begin());
  }
  return out;
}

}  // namespace detail

// The full training loop. Per episode: roll out, reshape rewards with the
// intrinsic module (none: identity; rnd: full state; mese: current mask),
// train the predictor on the recent window, update PPO every
// `episodes_per_update` episodes, and every `subspace_interval` episodes pick
// the root (first time) or update the mask.
inline TrainResult train(const RunSpec& spec, const TrainHooks& hooks = {}) {
  const TrainConfig& cfg = spec.train;
  cfg.validate();
  const pushbox::PushBox env(spec.env);
  const std::size_t dim = env.state_dim();
  const auto n_agents = static_cast<std::size_t>(spec.env.n_agents);
  const std::uint64_t seed = cfg.seed;

  TrainResult result;
  result.policies = make_policies(dim, dim, n_agents, cfg, derive_seed(seed, streams::kPolicyInit));
  Rng rollout_rng(derive_seed(seed, streams::kRollout));
  Rng ppo_rng(derive_seed(seed, streams::kPpo));
  Rng window_rng(derive_seed(seed, streams::kWindow));

  const bool intrinsic_on = spec.variant != Variant::kNone;
  std::optional<SubspaceState> subspace;
  RunningStd normalizer;
  const bool whiten = intrinsic_on && spec.intrinsic.normalize_inputs;
  InputNormalizer inputs(dim, spec.intrinsic.input_clip);
  if (spec.variant == Variant::kRnd) {
    result.mask = IndexSet::full(dim);
    result.rnd = init_rnd(dim, spec.intrinsic, derive_seed(seed, streams::kRndInit, 0));
  }

  std::deque<SampleBatch> window;
  RolloutBatch pending;
  PpoStats last_update;
  double predictor_loss = 0.0;

  for (std::size_t e = 1; e <= cfg.total_episodes; ++e) {
    RolloutBatch episode = collect_rollout(result.policies, env, 1, rollout_rng);
    EpisodeMetrics m;
    m.episode = e;
    m.steps = episode.steps.size();
    m.success = episode.successes.front();

    SampleBatch next_states(0, dim);
    for (const RolloutStep& s : episode.steps) next_states.append(s.next_state);
    std::vector<double> extrinsic;
    for (const RolloutStep& s : episode.steps) extrinsic.push_back(s.extrinsic);
    if (whiten) inputs.update(next_states);
    const RewardTrace trace = reshape_rewards(whiten ? inputs.apply(next_states) : next_states,
                                              extrinsic, result.rnd ? &*result.rnd : nullptr,
                                              result.mask, spec.intrinsic, &normalizer);
    for (std::size_t t = 0; t < episode.steps.size(); ++t) {
      RolloutStep& s = episode.steps[t];
      s.intrinsic = trace.intrinsic[t];
      s.reward = trace.reshaped[t];
      m.extrinsic_return += trace.extrinsic[t];
      m.reshaped_return += trace.reshaped[t];
      m.mean_intrinsic += trace.intrinsic[t];
      m.max_intrinsic = std::max(m.max_intrinsic, trace.intrinsic[t]);
    }
    m.mean_intrinsic /= static_cast<double>(episode.steps.size());
    pending.append(std::move(episode));

    if (e % cfg.episodes_per_update == 0) {
      const GaeResult gae = batch_advantages(pending, cfg);
      last_update = ppo_update(result.policies, pending, gae.advantages, gae.returns, cfg, ppo_rng);
      if (hooks.on_update) hooks.on_update(last_update);
      pending = RolloutBatch{};
    }

    if (intrinsic_on) {
      window.push_back(std::move(next_states));
      while (window.size() > cfg.subspace_interval) window.pop_front();
      SampleBatch recent;
      if (result.rnd || (spec.variant == Variant::kMese && e % cfg.subspace_interval == 0)) {
        recent = detail::window_batch(window, cfg.window_cap, window_rng);
      }
      if (result.rnd) {
        predictor_loss = train_predictor(
            *result.rnd, project(whiten ? inputs.apply(recent) : recent, result.mask));
      }

      if (spec.variant == Variant::kMese && e % cfg.subspace_interval == 0) {
        MaskEvent event;
        event.episode = e;
        event.previous = result.mask;
        if (!subspace) {
          event.candidates.reserve(dim);
          for (std::size_t j = 0; j < dim; ++j) {
            event.candidates.push_back(IndexSet{j});
            event.diversities.push_back(diversity(recent, IndexSet{j}, cfg.entropy));
          }
          subspace = make_subspace_state(select_root(recent, cfg.entropy), dim,
                                         cfg.subspace_interval, e);
        } else {
          event.candidates = subspace->candidates;
          SubspaceUpdate update = update_subspace(*subspace, recent, cfg.entropy);
          event.diversities = std::move(update.diversities);
          subspace = std::move(update.state);
          subspace->episode = e;
        }
        event.chosen = subspace->mask;
        if (subspace->mask.size() != result.mask.size()) {
          result.rnd = init_rnd(subspace->mask.size(), spec.intrinsic,
                                derive_seed(seed, streams::kRndInit, e));
        }
        result.mask = subspace->mask;
        if (hooks.on_mask) hooks.on_mask(event);
      }
    }

    m.mask = result.mask;
    m.predictor_loss = predictor_loss;
    m.actor_loss = last_update.actor_loss;
    m.critic_loss = last_update.critic_loss;
    detail::require_finite(m);
    if (hooks.on_episode) hooks.on_episode(m);
  }
  result.episodes = cfg.total_episodes;
  return result;
}

}  // namespace mese

#endif  // MESE_TRAINER_HPP_
