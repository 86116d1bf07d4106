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

#ifndef MESE_SUBSPACE_HPP_
#define MESE_SUBSPACE_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mese/entropy.hpp"
#include "mese/error.hpp"
#include "mese/index_set.hpp"

namespace mese {

// Coordinates of `state` selected by `indices`, ascending.
inline std::vector<double> mask(std::span<const double> state, const IndexSet& indices) {
  indices.validate(state.size());
  std::vector<double> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(state[i]);
  return out;
}

// Diversity of a candidate sub-state. Candidates are ranked by the surrogate
// entropy; the discrete entropy only decides between exactly equal surrogate
// values (which in practice means every neighbor distance was floored).
struct Diversity {
  double surrogate = 0.0;
  double discrete = 0.0;

  friend bool operator<(const Diversity& a, const Diversity& b) {
    if (a.surrogate != b.surrogate) return a.surrogate < b.surrogate;
    return a.discrete < b.discrete;
  }
};

inline Diversity diversity(const SampleBatch& batch, const IndexSet& dims,
                           const EntropyConfig& cfg) {
  const SampleBatch sub = project(batch, dims);
  return {entropy_mese(sub, cfg), discrete_entropy(sub)};
}

// Root of the subspace tree: the single column with the lowest diversity.
// Remaining ties go to the lowest column index.
inline IndexSet select_root(const SampleBatch& batch, const EntropyConfig& cfg) {
  if (batch.dims() == 0) throw ArgumentError("cannot select a root from zero dimensions");
  std::size_t best = 0;
  Diversity best_value;
  for (std::size_t j = 0; j < batch.dims(); ++j) {
    const Diversity value = diversity(batch, IndexSet{j}, cfg);
    if (j == 0 || value < best_value) {
      best = j;
      best_value = value;
    }
  }
  return IndexSet{best};
}

// One-index extensions of `current`, ordered by the added index.
inline std::vector<IndexSet> expand_candidates(const IndexSet& current, std::size_t dim) {
  std::vector<IndexSet> out;
  for (std::size_t i = 0; i < dim; ++i) {
    if (!current.contains(i)) out.push_back(current.with(i));
  }
  return out;
}

// H(s_j | s_I) = H(s_j, s_I) - H(s_I), both terms from the surrogate estimator.
inline double conditional_entropy(const SampleBatch& batch, const IndexSet& given,
                                  std::size_t j, const EntropyConfig& cfg) {
  if (given.contains(j)) {
    throw ArgumentError("dimension " + std::to_string(j) + " is already in the conditioning set");
  }
  return joint_entropy(batch, given.with(j), cfg) - joint_entropy(batch, given, cfg);
}

struct SubspaceState {
  IndexSet mask;
  // Expansions of `mask` by added index, followed by `mask` itself.
  std::vector<IndexSet> candidates;
  std::size_t episode = 0;
  std::size_t interval = 10;
  std::size_t dim = 0;
};

// Candidate list for a freshly chosen mask.
inline std::vector<IndexSet> candidate_list(const IndexSet& mask, std::size_t dim) {
  std::vector<IndexSet> out = expand_candidates(mask, dim);
  out.push_back(mask);
  return out;
}

inline SubspaceState make_subspace_state(IndexSet root, std::size_t dim,
                                         std::size_t interval, std::size_t episode = 0) {
  if (interval == 0) throw ArgumentError("subspace update interval must be >= 1");
  root.validate(dim);
  SubspaceState state;
  state.candidates = candidate_list(root, dim);
  state.mask = std::move(root);
  state.episode = episode;
  state.interval = interval;
  state.dim = dim;
  return state;
}

struct SubspaceUpdate {
  SubspaceState state;
  // One entry per candidate of the list that was evaluated.
  std::vector<Diversity> diversities;
  std::size_t chosen = 0;  // position of the winner in that list
};

// Evaluates every stored candidate, adopts the minimum-diversity one as the
// new mask and regenerates the candidate list around it. Full ties keep the
// earliest candidate in list order, so an extension that is exactly as
// compact as the current mask is preferred over standing still.
//
// Because the current mask is always last and all other candidates extend it
// by one column, this is argmin_j H(s_I, s_j), which equals
// argmin_j H(s_j | s_I) since H(s_I) does not depend on j.
inline SubspaceUpdate update_subspace(const SubspaceState& state, const SampleBatch& batch,
                                      const EntropyConfig& cfg) {
  if (state.candidates.empty()) {
    throw UsageError("subspace candidate list is empty");
  }
  if (batch.dims() != state.dim) {
    throw ShapeError("batch width " + std::to_string(batch.dims()) +
                     " does not match state dimension " + std::to_string(state.dim));
  }
  SubspaceUpdate update;
  update.diversities.reserve(state.candidates.size());
  for (std::size_t c = 0; c < state.candidates.size(); ++c) {
    const Diversity value = diversity(batch, state.candidates[c], cfg);
    update.diversities.push_back(value);
    if (c == 0 || value < update.diversities[update.chosen]) update.chosen = c;
  }
  const IndexSet& winner = state.candidates[update.chosen];
  update.state = state;
  update.state.candidates = candidate_list(winner, state.dim);
  update.state.mask = winner;
  return update;
}

}  // namespace mese

#endif  // MESE_SUBSPACE_HPP_
