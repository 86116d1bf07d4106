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


#include <gtest/gtest.h>

#include <vector>

#include "generators.hpp"
#include "mese/subspace.hpp"
#include "oracles.hpp"

namespace mese {
namespace {

TEST(MaskTest, SelectsIndexedCoordinatesInOrder) {
  const std::vector<double> s{1.5, 2.5, 3.5};
  EXPECT_EQ(mask(s, IndexSet{0, 1}), (std::vector<double>{1.5, 2.5}));
  EXPECT_EQ(mask(s, IndexSet::full(3)), s);
  const std::vector<double> t{7, 8, 9};
  EXPECT_EQ(mask(t, IndexSet{2}), (std::vector<double>{9}));
  EXPECT_EQ(mask(t, IndexSet{2, 0}), (std::vector<double>{7, 9}));
}

TEST(MaskTest, OutOfRangeIndexIsArgumentError) {
  const std::vector<double> s{1, 2, 3};
  EXPECT_THROW(mask(s, IndexSet{3}), ArgumentError);
}

TEST(SelectRootTest, PicksTheConstantColumn) {
  Rng rng(1);
  SampleBatch b = gen::uniform_batch(rng, 120, 4);
  for (std::size_t i = 0; i < b.rows(); ++i) b.at(i, 2) = 0.5;
  EXPECT_EQ(select_root(b, {}), IndexSet{2});
  EXPECT_EQ(select_root(b, {}), IndexSet{oracle::root(b, 3)});
}

TEST(SelectRootTest, SingleColumn) {
  Rng rng(2);
  EXPECT_EQ(select_root(gen::uniform_batch(rng, 10, 1), {}), IndexSet{0});
}

TEST(SelectRootTest, IdenticalConstantColumnsPickLowerIndex) {
  Rng rng(3);
  SampleBatch b = gen::uniform_batch(rng, 50, 4);
  for (std::size_t i = 0; i < b.rows(); ++i) b.at(i, 1) = b.at(i, 3) = 2.0;
  EXPECT_EQ(select_root(b, {}), IndexSet{1});
}

TEST(SelectRootTest, FullyFlooredColumnsSeparatedByValueCount) {
  // Both columns repeat every value more than k times, so every neighbor
  // distance is floored and the surrogate ties; column 1 takes fewer values.
  SampleBatch b(64, 2);
  for (std::size_t i = 0; i < 64; ++i) {
    b.at(i, 0) = static_cast<double>(i % 8);
    b.at(i, 1) = static_cast<double>(i % 2);
  }
  EXPECT_EQ(joint_entropy(b, IndexSet{0}, {}), joint_entropy(b, IndexSet{1}, {}));
  EXPECT_EQ(select_root(b, {}), IndexSet{1});
}

TEST(ExpandCandidatesTest, AddsEachMissingIndex) {
  EXPECT_EQ(expand_candidates(IndexSet{0}, 3),
            (std::vector<IndexSet>{IndexSet{0, 1}, IndexSet{0, 2}}));
  EXPECT_TRUE(expand_candidates(IndexSet::full(4), 4).empty());
}

TEST(ExpandCandidatesTest, SizeAndShapeOverAllSubsets) {
  for (std::size_t d = 1; d <= 6; ++d) {
    for (std::size_t bits = 1; bits < (1u << d); ++bits) {
      std::vector<std::size_t> idx;
      for (std::size_t j = 0; j < d; ++j) {
        if (bits & (1u << j)) idx.push_back(j);
      }
      const IndexSet s(idx);
      const auto out = expand_candidates(s, d);
      ASSERT_EQ(out.size(), d - s.size());
      for (const IndexSet& c : out) {
        EXPECT_EQ(c.size(), s.size() + 1);
        EXPECT_TRUE(s.is_subset_of(c));
      }
    }
  }
}

TEST(ConditionalEntropyTest, EqualsJointDifference) {
  Rng rng(4);
  const SampleBatch b = gen::uniform_batch(rng, 80, 3);
  const EntropyConfig cfg;
  EXPECT_EQ(conditional_entropy(b, IndexSet{0}, 1, cfg),
            joint_entropy(b, IndexSet{0, 1}, cfg) - joint_entropy(b, IndexSet{0}, cfg));
  EXPECT_EQ(conditional_entropy(b, IndexSet{0, 2}, 1, cfg),
            joint_entropy(b, IndexSet{0, 1, 2}, cfg) - joint_entropy(b, IndexSet{0, 2}, cfg));
}

TEST(ConditionalEntropyTest, DuplicateColumnBelowIndependentColumn) {
  Rng rng(5);
  SampleBatch b = gen::uniform_batch(rng, 200, 3);
  for (std::size_t i = 0; i < b.rows(); ++i) b.at(i, 1) = b.at(i, 0);
  const double dup = conditional_entropy(b, IndexSet{0}, 1, {});
  const double indep = conditional_entropy(b, IndexSet{0}, 2, {});
  EXPECT_LT(dup, indep);
}

TEST(ConditionalEntropyTest, MemberIndexIsArgumentError) {
  Rng rng(6);
  const SampleBatch b = gen::uniform_batch(rng, 20, 2);
  EXPECT_THROW(conditional_entropy(b, IndexSet{0}, 0, {}), ArgumentError);
}

TEST(UpdateSubspaceTest, TwoConstantColumnsGrowTheMask) {
  Rng rng(7);
  SampleBatch b = gen::uniform_batch(rng, 100, 3);
  for (std::size_t i = 0; i < b.rows(); ++i) b.at(i, 0) = b.at(i, 1) = 1.0;
  const SubspaceState s = make_subspace_state(IndexSet{0}, 3, 10);
  EXPECT_EQ(s.candidates, (std::vector<IndexSet>{IndexSet{0, 1}, IndexSet{0, 2}, IndexSet{0}}));
  const SubspaceUpdate u = update_subspace(s, b, {});
  EXPECT_EQ(u.state.mask, (IndexSet{0, 1}));
  EXPECT_EQ(u.chosen, 0u);
  EXPECT_EQ(u.diversities.size(), 3u);
}

TEST(UpdateSubspaceTest, OnlyCurrentMaskKeepsIt) {
  Rng rng(8);
  const SampleBatch b = gen::uniform_batch(rng, 40, 3);
  SubspaceState s = make_subspace_state(IndexSet{1}, 3, 10);
  s.candidates = {IndexSet{1}};
  EXPECT_EQ(update_subspace(s, b, {}).state.mask, IndexSet{1});
}

TEST(UpdateSubspaceTest, NewListIsMaskAndItsExtensions) {
  Rng rng(9);
  const SampleBatch b = gen::uniform_batch(rng, 60, 5);
  const SubspaceUpdate u = update_subspace(make_subspace_state(IndexSet{3}, 5, 10), b, {});
  const IndexSet& m = u.state.mask;
  EXPECT_EQ(u.state.candidates.back(), m);
  for (std::size_t c = 0; c + 1 < u.state.candidates.size(); ++c) {
    EXPECT_EQ(u.state.candidates[c].size(), m.size() + 1);
    EXPECT_TRUE(m.is_subset_of(u.state.candidates[c]));
  }
}

TEST(UpdateSubspaceTest, EmptyListAndWrongWidthAreErrors) {
  Rng rng(10);
  const SampleBatch b = gen::uniform_batch(rng, 20, 3);
  SubspaceState s = make_subspace_state(IndexSet{0}, 3, 10);
  s.candidates.clear();
  EXPECT_THROW(update_subspace(s, b, {}), UsageError);
  const SubspaceState t = make_subspace_state(IndexSet{0}, 4, 10);
  EXPECT_THROW(update_subspace(t, b, {}), ShapeError);
  EXPECT_THROW(make_subspace_state(IndexSet{0}, 3, 0), ArgumentError);
}

TEST(SubspacePropertyTest, MonotoneGrowthDeterminismAndTranslation) {
  Rng rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t d = 2 + rng.below(4);
    SampleBatch b = gen::dyadic_batch(rng, 30 + rng.below(100), d);
    if (trial % 3 == 0) {
      for (std::size_t i = 0; i < b.rows(); ++i) b.at(i, rng.below(d)) = 0.0;
    }
    SubspaceState s = make_subspace_state(select_root(b, {}), d, 10);
    SampleBatch moved = b;
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t i = 0; i < b.rows(); ++i) moved.at(i, j) += 1.25;
    }
    for (int step = 0; step < 4; ++step) {
      const SubspaceUpdate u = update_subspace(s, b, {});
      const SubspaceUpdate again = update_subspace(s, b, {});
      const SubspaceUpdate shifted = update_subspace(s, moved, {});
      EXPECT_EQ(u.state.mask, again.state.mask);
      EXPECT_EQ(u.state.mask, shifted.state.mask);
      const std::size_t before = s.mask.size();
      const std::size_t after = u.state.mask.size();
      EXPECT_TRUE(after == before || after == before + 1);
      EXPECT_TRUE(s.mask.is_subset_of(u.state.mask));
      s = u.state;
    }
  }
}

TEST(SubspacePropertyTest, MatchesExhaustiveEvaluation) {
  Rng rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t d = 1 + rng.below(5);
    const std::size_t n = 10 + rng.below(190);
    SampleBatch b = trial % 2 ? gen::uniform_batch(rng, n, d) : gen::lattice_batch(rng, n, d, 3);
    const IndexSet root = select_root(b, {});
    ASSERT_EQ(root, IndexSet{oracle::root(b, 3)}) << "trial " << trial;
    SubspaceState s = make_subspace_state(root, d, 10);
    for (std::size_t step = 0; step < d; ++step) {
      const IndexSet expected = oracle::grow(b, s.mask, 3);
      s = update_subspace(s, b, {}).state;
      ASSERT_EQ(s.mask, expected) << "trial " << trial << " step " << step;
    }
  }
}

}  // namespace
}  // namespace mese
