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

#include <cmath>
#include <numbers>
#include <vector>

#include "generators.hpp"
#include "mese/entropy.hpp"
#include "oracles.hpp"

namespace mese {
namespace {

SampleBatch line(std::vector<double> xs) {
  std::vector<std::vector<double>> rows;
  for (double x : xs) rows.push_back({x});
  return SampleBatch::from_rows(rows);
}

TEST(KnnDistancesTest, ThreePointsOnALine) {
  const SampleBatch b = line({0.0, 1.0, 2.0});
  EXPECT_EQ(knn_distances(b, {.k = 1}), (std::vector<double>{1, 1, 1}));
  EXPECT_EQ(knn_distances(b, {.k = 2}), (std::vector<double>{1, 2, 1, 1, 1, 2}));
}

TEST(KnnDistancesTest, RowsAscendingAndFloored) {
  const SampleBatch b = line({0.0, 0.0, 0.0, 5.0});
  const std::vector<double> d = knn_distances(b, {.k = 2, .epsilon_floor = 1e-6});
  EXPECT_EQ(d[0], 1e-6);
  EXPECT_EQ(d[1], 1e-6);
  EXPECT_EQ(d[6], 5.0);
  EXPECT_EQ(d[7], 5.0);
}

TEST(KnnDistancesTest, KTooLargeIsArgumentError) {
  const SampleBatch b = line({0.0, 1.0, 2.0});
  EXPECT_THROW(knn_distances(b, {.k = 3}), ArgumentError);
  EXPECT_THROW(knn_distances(b, {.k = 0}), ArgumentError);
}

TEST(KnnTest, TiesResolveToLowerIndex) {
  const SampleBatch b = line({0.0, -1.0, 1.0, 3.0});
  const KnnResult r = knn(b, 2);
  EXPECT_EQ(r.neighbors(0)[0], 1u);
  EXPECT_EQ(r.neighbors(0)[1], 2u);
}

TEST(KnnTest, KdTreeMatchesBruteForceOn500Points) {
  Rng rng(1);
  const SampleBatch b = gen::uniform_batch(rng, 500, 3);
  const KnnResult brute = knn_brute_force(b, 4);
  const KnnResult tree = knn_kdtree(b, 4);
  EXPECT_EQ(brute.index, tree.index);
  EXPECT_EQ(brute.distance, tree.distance);
  const auto ref = oracle::knn(b, 4);
  for (std::size_t i = 0; i < b.rows(); ++i) {
    const auto got = tree.neighbors(i);
    EXPECT_EQ(std::vector<std::size_t>(got.begin(), got.end()), ref[i]);
  }
}

TEST(KnnTest, KdTreeMatchesBruteForceWithHeavyTies) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 20 + rng.below(600);
    const std::size_t d = 1 + rng.below(4);
    const SampleBatch b = gen::lattice_batch(rng, n, d, 3);
    const std::size_t k = 1 + rng.below(6);
    const KnnResult brute = knn_brute_force(b, k);
    const KnnResult tree = knn_kdtree(b, k);
    ASSERT_EQ(brute.index, tree.index) << "trial " << trial;
    ASSERT_EQ(brute.distance, tree.distance) << "trial " << trial;
  }
}

TEST(KnnTest, LargeBatchDispatchesToTreeWithSameResult) {
  Rng rng(3);
  const SampleBatch b = gen::gaussian_batch(rng, kBruteForceLimit + 300, 2);
  const KnnResult viaDispatch = knn(b, 3);
  const KnnResult brute = knn_brute_force(b, 3);
  EXPECT_EQ(viaDispatch.index, brute.index);
}

TEST(EntropyKlTest, GaussianAndUniformReferenceValues) {
  const EntropyConfig cfg{.k = 3};
  int gaussian_ok = 0, uniform_ok = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    const double g = entropy_kl(gen::gaussian_batch(rng, 4096, 2), cfg);
    const double u = entropy_kl(gen::uniform_batch(rng, 4096, 2), cfg);
    gaussian_ok += std::abs(g - std::log(2.0 * std::numbers::pi * std::numbers::e)) <= 0.10;
    uniform_ok += std::abs(u) <= 0.10;
  }
  EXPECT_GE(gaussian_ok, 4);
  EXPECT_GE(uniform_ok, 4);
}

TEST(EntropyKlTest, MatchesIndependentFormula) {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t d = 1 + rng.below(4);
    const SampleBatch b = gen::gaussian_batch(rng, 50 + rng.below(200), d);
    const std::size_t k = 1 + rng.below(5);
    EXPECT_NEAR(entropy_kl(b, {.k = k}), oracle::entropy_kl(b, k), 1e-9);
  }
}

TEST(EntropyKlTest, ScalingByTwoAddsDLog2) {
  Rng rng(5);
  const SampleBatch b = gen::uniform_batch(rng, 300, 3);
  SampleBatch scaled = b;
  for (std::size_t i = 0; i < b.rows(); ++i) {
    for (std::size_t j = 0; j < 3; ++j) scaled.at(i, j) *= 2.0;
  }
  EXPECT_NEAR(entropy_kl(scaled, {}) - entropy_kl(b, {}), 3.0 * std::log(2.0), 1e-9);
}

TEST(EntropyKlTest, DigammaAndBallVolume) {
  EXPECT_NEAR(detail::digamma_int(1), -std::numbers::egamma, 1e-15);
  EXPECT_NEAR(detail::digamma_int(4), 1.0 + 0.5 + 1.0 / 3.0 - std::numbers::egamma, 1e-14);
  EXPECT_NEAR(log_unit_ball_volume(1), std::log(2.0), 1e-14);
  EXPECT_NEAR(log_unit_ball_volume(2), std::log(std::numbers::pi), 1e-14);
  EXPECT_NEAR(log_unit_ball_volume(3), std::log(4.0 / 3.0 * std::numbers::pi), 1e-14);
}

TEST(EntropyMeseTest, ThreePointsIsZero) {
  EXPECT_EQ(entropy_mese(line({0.0, 1.0, 2.0}), {.k = 1}), 0.0);
}

TEST(EntropyMeseTest, MatchesIndependentFormula) {
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const SampleBatch b = gen::uniform_batch(rng, 30 + rng.below(150), 1 + rng.below(5));
    const std::size_t k = 1 + rng.below(4);
    EXPECT_NEAR(entropy_mese(b, {.k = k}), oracle::entropy_mese(b, k), 1e-9);
  }
}

TEST(EntropyMeseTest, ScalingAddsNLogC) {
  Rng rng(7);
  const SampleBatch b = gen::gaussian_batch(rng, 200, 2);
  SampleBatch scaled = b;
  for (std::size_t i = 0; i < b.rows(); ++i) {
    for (std::size_t j = 0; j < 2; ++j) scaled.at(i, j) *= 3.0;
  }
  EXPECT_NEAR(entropy_mese(scaled, {}) - entropy_mese(b, {}), 200.0 * std::log(3.0), 1e-9);
}

TEST(EntropyMeseTest, NonFiniteSampleIsArgumentError) {
  SampleBatch b = line({0.0, 1.0, 2.0, 3.0, 4.0});
  b.at(2, 0) = std::nan("");
  EXPECT_THROW(entropy_mese(b, {}), ArgumentError);
  EXPECT_THROW(entropy_kl(b, {}), ArgumentError);
}

TEST(EntropyPropertyTest, TranslationIsBitExact) {
  Rng rng(8);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t d = 1 + rng.below(4);
    const SampleBatch b = gen::dyadic_batch(rng, 20 + rng.below(100), d);
    SampleBatch moved = b;
    for (std::size_t j = 0; j < d; ++j) {
      const double shift = static_cast<double>(static_cast<int>(rng.below(64)) - 32) / 8.0;
      for (std::size_t i = 0; i < b.rows(); ++i) moved.at(i, j) += shift;
    }
    EXPECT_EQ(entropy_mese(moved, {}), entropy_mese(b, {}));
    EXPECT_EQ(entropy_kl(moved, {}), entropy_kl(b, {}));
  }
}

TEST(EntropyPropertyTest, RowPermutationIsBitExact) {
  Rng rng(9);
  for (int trial = 0; trial < 25; ++trial) {
    const SampleBatch b = gen::gaussian_batch(rng, 20 + rng.below(700), 1 + rng.below(4));
    std::vector<std::size_t> perm(b.rows());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng.shuffle(perm.begin(), perm.end());
    SampleBatch shuffled(b.rows(), b.dims());
    for (std::size_t i = 0; i < b.rows(); ++i) {
      for (std::size_t j = 0; j < b.dims(); ++j) shuffled.at(i, j) = b.at(perm[i], j);
    }
    EXPECT_EQ(entropy_mese(shuffled, {}), entropy_mese(b, {}));
    EXPECT_EQ(entropy_kl(shuffled, {}), entropy_kl(b, {}));
  }
}

TEST(EntropyPropertyTest, IncreasingInSigma) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    double prev_kl = -1e300, prev_mese = -1e300;
    for (double sigma : {0.5, 1.0, 2.0}) {
      const SampleBatch b = gen::gaussian_batch(rng, 2048, 1, sigma);
      const double kl = entropy_kl(b, {});
      const double ms = entropy_mese(b, {});
      EXPECT_GT(kl, prev_kl) << "seed " << seed << " sigma " << sigma;
      EXPECT_GT(ms, prev_mese) << "seed " << seed << " sigma " << sigma;
      prev_kl = kl;
      prev_mese = ms;
    }
  }
}

TEST(JointEntropyTest, AllColumnsEqualsFullEstimate) {
  Rng rng(10);
  const SampleBatch b = gen::uniform_batch(rng, 100, 3);
  EXPECT_EQ(joint_entropy(b, IndexSet::full(3), {}), entropy_mese(b, {}));
}

TEST(JointEntropyTest, ConstantColumnIsNLogFloor) {
  Rng rng(11);
  SampleBatch b = gen::uniform_batch(rng, 64, 2);
  for (std::size_t i = 0; i < 64; ++i) b.at(i, 1) = 0.25;
  EXPECT_NEAR(joint_entropy(b, IndexSet{1}, {}), 64.0 * std::log(1e-12), 1e-9);
}

TEST(JointEntropyTest, ProjectionMatchesColumnCopyOracle) {
  Rng rng(12);
  const SampleBatch b = gen::uniform_batch(rng, 150, 4);
  for (const IndexSet& s : {IndexSet{0}, IndexSet{2}, IndexSet{0, 2}, IndexSet{1, 3}}) {
    EXPECT_EQ(joint_entropy(b, s, {}), entropy_mese(oracle::columns(b, s), {}));
    EXPECT_NEAR(joint_entropy(b, s, {}), oracle::entropy_mese(oracle::columns(b, s), 3), 1e-9);
  }
}

TEST(JointEntropyTest, BadIndexSetsAreArgumentErrors) {
  Rng rng(13);
  const SampleBatch b = gen::uniform_batch(rng, 20, 2);
  EXPECT_THROW(joint_entropy(b, IndexSet{}, {}), ArgumentError);
  EXPECT_THROW(joint_entropy(b, IndexSet{2}, {}), ArgumentError);
}

TEST(DiscreteEntropyTest, CountsDistinctRows) {
  EXPECT_EQ(discrete_entropy(line({1, 1, 1, 1})), 0.0);
  EXPECT_NEAR(discrete_entropy(line({1, 2, 1, 2})), std::log(2.0), 1e-15);
  EXPECT_NEAR(discrete_entropy(line({0, 1, 2, 3})), std::log(4.0), 1e-15);
  Rng rng(14);
  const SampleBatch b = gen::lattice_batch(rng, 300, 2, 4);
  EXPECT_NEAR(discrete_entropy(b), oracle::discrete_entropy(b), 1e-12);
}

}  // namespace
}  // namespace mese
