// Copyright 2026 The fsdbench Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fsd/errors.hpp"
#include "fsd/memory.hpp"
#include "test_util.hpp"

namespace fsd::mem {
namespace {

using num::Tensor;
using testing::randn;

TEST(Kmeans, DistinctPointsEqualToClustersGiveZeroObjective) {
  Tensor x = randn({5, 3}, 1);
  auto [bank, report] = post_train_teacher_memory(x, 5, 3, 42);
  EXPECT_EQ(report.objective.back(), 0.0);
  std::vector<std::vector<double>> pts = testing::rows_of(x), cs = testing::rows_of(bank.centroids);
  std::sort(pts.begin(), pts.end());
  std::sort(cs.begin(), cs.end());
  EXPECT_EQ(pts, cs);
  EXPECT_FALSE(bank.trainable);
}

// Exhaustive 2-partition enumeration of {0, 1, 10, 11}.
TEST(Kmeans, FourPointInstanceMatchesEnumeration) {
  const std::vector<double> pts = {0, 1, 10, 11};
  double best = 1e300;
  for (unsigned mask = 1; mask < 15; ++mask) {
    double s[2] = {0, 0}, c[2] = {0, 0};
    for (unsigned i = 0; i < 4; ++i) {
      s[(mask >> i) & 1] += pts[i];
      c[(mask >> i) & 1] += 1;
    }
    double obj = 0;
    for (unsigned i = 0; i < 4; ++i) {
      const unsigned g = (mask >> i) & 1;
      obj += (pts[i] - s[g] / c[g]) * (pts[i] - s[g] / c[g]);
    }
    best = std::min(best, obj);
  }
  EXPECT_EQ(best, 1.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto [bank, report] = post_train_teacher_memory(Tensor::from({4, 1}, pts), 2, kDefaultKmeansEpochs, seed);
    std::vector<double> c = bank.centroids.to_vector();
    std::sort(c.begin(), c.end());
    EXPECT_EQ(c, (std::vector<double>{0.5, 10.5})) << "seed " << seed;
    EXPECT_EQ(report.objective.back(), best);
    EXPECT_EQ(report.epochs_run, 3u);
  }
}

TEST(Kmeans, SingleCentroidAssignsAllAndUpdatesToMean) {
  Tensor x = randn({6, 2}, 2);
  Tensor c = Tensor::from({1, 2}, {100.0, -4.0});
  auto a = assign(x, c);
  EXPECT_TRUE(std::all_of(a.begin(), a.end(), [](std::size_t v) { return v == 0; }));
  Tensor m = update(x, a, c);
  for (std::size_t k = 0; k < 2; ++k) {
    double mean = 0;
    for (std::size_t i = 0; i < 6; ++i) mean += x.at(i, k);
    EXPECT_NEAR(m.at(0, k), mean / 6.0, 1e-15);
  }
}

TEST(Kmeans, TieGoesToLowestIndex) {
  Tensor x = Tensor::from({1, 1}, {5.0});
  Tensor c = Tensor::from({3, 1}, {7.0, 3.0, 7.0});
  EXPECT_EQ(assign(x, c)[0], 0u);
}

TEST(Kmeans, EmptyClusterMovesToFarthestPoint) {
  Tensor x = Tensor::from({4, 1}, {0.0, 1.0, 2.0, 9.0});
  Tensor c = Tensor::from({3, 1}, {1.0, 100.0, 200.0});
  auto a = assign(x, c);
  std::size_t moved = 0;
  Tensor m = update(x, a, c, &moved);
  EXPECT_EQ(moved, 2u);
  EXPECT_EQ(m.at(0, 0), 3.0);
  EXPECT_EQ(m.at(1, 0), 9.0);
  EXPECT_EQ(m.at(2, 0), 0.0);
}

TEST(Kmeans, StepNeverIncreasesObjective) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Tensor x = randn({12, 3}, 100 + seed);
    Tensor c = randn({3, 3}, 200 + seed);
    auto a0 = assign(x, c);
    double prev = objective(x, c, a0);
    for (int e = 0; e < 6; ++e) {
      auto a = assign(x, c);
      EXPECT_LE(objective(x, c, a), prev + 1e-12);
      c = update(x, a, c);
      const double cur = objective(x, c, a);
      EXPECT_LE(cur, objective(x, c, a) + 1e-12);
      EXPECT_LE(cur, prev + 1e-12) << "seed " << seed << " epoch " << e;
      prev = cur;
    }
  }
}

TEST(Kmeans, ReportObjectiveNonIncreasingAndDeterministic) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Tensor x = randn({30, 4}, 300 + seed);
    auto [bank, report] = post_train_teacher_memory(x, 4, 8, seed);
    for (std::size_t e = 1; e < report.objective.size(); ++e) {
      EXPECT_LE(report.objective[e], report.objective[e - 1] + 1e-12);
    }
    auto again = post_train_teacher_memory(x, 4, 8, seed);
    EXPECT_EQ(again.first.centroids.to_vector(), bank.centroids.to_vector());
    std::size_t total = 0;
    for (std::size_t v : report.counts) total += v;
    EXPECT_EQ(total, 30u);
  }
}

TEST(Kmeans, FixedPointAfterConvergence) {
  Tensor x = randn({20, 2}, 9);
  auto [bank, report] = post_train_teacher_memory(x, 3, 50, 1);
  auto a = assign(x, bank.centroids);
  Tensor c2 = update(x, a, bank.centroids);
  EXPECT_EQ(c2.to_vector(), bank.centroids.to_vector());
}

TEST(Kmeans, Errors) {
  EXPECT_THROW(post_train_teacher_memory(randn({3, 2}, 1), 4, 3, 0), UsageError);
  EXPECT_THROW(assign(randn({3, 2}, 1), randn({2, 3}, 2)), ShapeError);
}

TEST(StudentMemory, DeterministicAndScaled) {
  MemoryBank a = init_student_memory(8, 16, 5);
  MemoryBank b = init_student_memory(8, 16, 5);
  MemoryBank c = init_student_memory(8, 16, 6);
  EXPECT_EQ(a.centroids.to_vector(), b.centroids.to_vector());
  EXPECT_NE(a.centroids.to_vector(), c.centroids.to_vector());
  EXPECT_TRUE(a.trainable);
  EXPECT_TRUE(a.centroids.requires_grad());
  MemoryBank big = init_student_memory(100, 100, 7);
  double s = 0, ss = 0;
  for (double v : big.centroids.data()) {
    s += v;
    ss += v * v;
  }
  const double var = ss / 1e4 - (s / 1e4) * (s / 1e4);
  EXPECT_NEAR(var, 0.02 * 0.02, 0.2 * 0.02 * 0.02);
}

}  // namespace
}  // namespace fsd::mem
