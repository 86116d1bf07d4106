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

#ifndef MESE_INTRINSIC_HPP_
#define MESE_INTRINSIC_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mese/entropy.hpp"
#include "mese/error.hpp"
#include "mese/index_set.hpp"
#include "mese/nn.hpp"
#include "mese/rng.hpp"
#include "mese/subspace.hpp"

namespace mese {

struct IntrinsicConfig {
  double beta = 1.0;
  std::size_t feature_dim = 32;
  std::vector<std::size_t> hidden{64, 64};
  double predictor_lr = 1e-3;
  // Divide rewards by a running std of past intrinsic rewards.
  bool normalize = false;
  // Whiten RND inputs per state dimension with running mean/std, then clip
  // to [-input_clip, input_clip].
  bool normalize_inputs = false;
  double input_clip = 5.0;
};

// Random network distillation pair: a frozen random target and a predictor
// trained to match it. Novel inputs have large prediction error.
struct RndPair {
  nn::MlpParams target;
  nn::MlpParams predictor;
  nn::AdamState adam;
  std::size_t input_dim = 0;
  std::size_t feature_dim = 0;
};

inline RndPair init_rnd(std::size_t input_dim, const IntrinsicConfig& cfg,
                        std::uint64_t seed) {
  if (input_dim == 0) throw ArgumentError("RND input dimension must be >= 1");
  if (cfg.feature_dim == 0) throw ArgumentError("RND feature dimension must be >= 1");
  std::vector<std::size_t> sizes{input_dim};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(cfg.feature_dim);
  Rng target_rng(derive_seed(seed, 0x7a79));
  Rng predictor_rng(derive_seed(seed, 0x9e3d));
  RndPair rnd;
  rnd.target = nn::make_mlp(sizes, nn::Activation::kRelu, target_rng);
  rnd.predictor = nn::make_mlp(sizes, nn::Activation::kRelu, predictor_rng);
  rnd.adam = nn::AdamState::for_params(rnd.predictor, nn::AdamConfig{.lr = cfg.predictor_lr});
  rnd.input_dim = input_dim;
  rnd.feature_dim = cfg.feature_dim;
  return rnd;
}

namespace detail {

inline Eigen::MatrixXd to_columns(const SampleBatch& batch) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(batch.dims()),
                    static_cast<Eigen::Index>(batch.rows()));
  for (std::size_t i = 0; i < batch.rows(); ++i) {
    for (std::size_t j = 0; j < batch.dims(); ++j) {
      x(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = batch.at(i, j);
    }
  }
  return x;
}

}  // namespace detail

// Squared feature-prediction error for every row of `sub_states`.
inline std::vector<double> intrinsic_rewards(const RndPair& rnd, const SampleBatch& sub_states) {
  if (sub_states.dims() != rnd.input_dim) {
    throw ShapeError("sub-state has " + std::to_string(sub_states.dims()) +
                     " dimensions, RND expects " + std::to_string(rnd.input_dim));
  }
  const Eigen::MatrixXd x = detail::to_columns(sub_states);
  const Eigen::MatrixXd diff = nn::forward_batch(rnd.predictor, x) - nn::forward_batch(rnd.target, x);
  const Eigen::RowVectorXd err = diff.colwise().squaredNorm();
  return std::vector<double>(err.data(), err.data() + err.size());
}

inline double intrinsic_reward(const RndPair& rnd, std::span<const double> sub_state) {
  if (sub_state.size() != rnd.input_dim) {
    throw ShapeError("sub-state has " + std::to_string(sub_state.size()) +
                     " dimensions, RND expects " + std::to_string(rnd.input_dim));
  }
  const Eigen::VectorXd diff = nn::forward(rnd.predictor, sub_state) - nn::forward(rnd.target, sub_state);
  return diff.squaredNorm();
}

// One Adam step on the mean squared prediction error over the batch. Returns
// the pre-step mean loss. The target network is never modified.
inline double train_predictor(RndPair& rnd, const SampleBatch& sub_states) {
  if (sub_states.rows() == 0) throw ArgumentError("predictor training batch is empty");
  if (sub_states.dims() != rnd.input_dim) {
    throw ShapeError("training batch has " + std::to_string(sub_states.dims()) +
                     " dimensions, RND expects " + std::to_string(rnd.input_dim));
  }
  const Eigen::MatrixXd x = detail::to_columns(sub_states);
  const nn::ForwardCache cache = nn::forward_cached(rnd.predictor, x);
  const Eigen::MatrixXd diff = cache.output() - nn::forward_batch(rnd.target, x);
  const double n = static_cast<double>(sub_states.rows());
  const double loss = diff.colwise().squaredNorm().sum() / n;
  if (!std::isfinite(loss)) throw TrainingError("non-finite RND predictor loss");
  const nn::Gradients grads = nn::backward_batch(rnd.predictor, cache, (2.0 / n) * diff);
  nn::adam_step(rnd.predictor, grads, rnd.adam);
  return loss;
}

// Running variance of the intrinsic reward stream (Welford).
class RunningStd {
 public:
  void update(std::span<const double> values) {
    for (double v : values) {
      count_ += 1.0;
      const double delta = v - mean_;
      mean_ += delta / count_;
      m2_ += delta * (v - mean_);
    }
  }
  double std() const { return count_ > 1.0 ? std::sqrt(m2_ / (count_ - 1.0)) : 1.0; }

 private:
  double count_ = 0.0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

// Per-dimension running mean and variance of states (Welford), used to
// whiten RND inputs.
class InputNormalizer {
 public:
  explicit InputNormalizer(std::size_t dims = 0, double clip = 5.0)
      : clip_(clip), mean_(dims, 0.0), m2_(dims, 0.0) {}

  void update(const SampleBatch& batch) {
    if (batch.dims() != mean_.size()) throw ShapeError("normalizer width mismatch");
    for (std::size_t i = 0; i < batch.rows(); ++i) {
      count_ += 1.0;
      for (std::size_t j = 0; j < mean_.size(); ++j) {
        const double delta = batch.at(i, j) - mean_[j];
        mean_[j] += delta / count_;
        m2_[j] += delta * (batch.at(i, j) - mean_[j]);
      }
    }
  }

  double mean(std::size_t j) const { return mean_.at(j); }
  // Population std floored at 1e-4 so constant dimensions map to 0.
  double std(std::size_t j) const {
    const double var = count_ > 0.0 ? m2_.at(j) / count_ : 0.0;
    return std::max(std::sqrt(var), 1e-4);
  }

  SampleBatch apply(const SampleBatch& batch) const {
    if (batch.dims() != mean_.size()) throw ShapeError("normalizer width mismatch");
    SampleBatch out(batch.rows(), batch.dims());
    for (std::size_t i = 0; i < batch.rows(); ++i) {
      for (std::size_t j = 0; j < mean_.size(); ++j) {
        out.at(i, j) = std::clamp((batch.at(i, j) - mean_[j]) / std(j), -clip_, clip_);
      }
    }
    return out;
  }

 private:
  double clip_;
  double count_ = 0.0;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

struct RewardTrace {
  std::vector<double> extrinsic;
  std::vector<double> intrinsic;  // already scaled by beta (and normalized)
  std::vector<double> reshaped;   // extrinsic + intrinsic
};

// r'_t = r_t + beta * R_in(mask(s_{t+1}, I)). A null `rnd` or beta == 0 leaves
// the rewards unchanged. `next_states` holds full (unmasked) states row-wise.
inline RewardTrace reshape_rewards(const SampleBatch& next_states,
                                   std::span<const double> extrinsic, const RndPair* rnd,
                                   const IndexSet& indices, const IntrinsicConfig& cfg,
                                   RunningStd* normalizer = nullptr) {
  if (next_states.rows() != extrinsic.size()) {
    throw ShapeError("episode has " + std::to_string(extrinsic.size()) + " rewards but " +
                     std::to_string(next_states.rows()) + " next states");
  }
  RewardTrace trace;
  trace.extrinsic.assign(extrinsic.begin(), extrinsic.end());
  trace.intrinsic.assign(extrinsic.size(), 0.0);
  if (rnd != nullptr && cfg.beta != 0.0 && !extrinsic.empty()) {
    std::vector<double> bonus = intrinsic_rewards(*rnd, project(next_states, indices));
    double scale = cfg.beta;
    if (cfg.normalize && normalizer != nullptr) {
      normalizer->update(bonus);
      scale /= normalizer->std() + 1e-8;
    }
    for (std::size_t t = 0; t < bonus.size(); ++t) trace.intrinsic[t] = scale * bonus[t];
  }
  trace.reshaped.resize(extrinsic.size());
  for (std::size_t t = 0; t < extrinsic.size(); ++t) {
    trace.reshaped[t] = trace.extrinsic[t] + trace.intrinsic[t];
  }
  return trace;
}

}  // namespace mese

#endif  // MESE_INTRINSIC_HPP_
