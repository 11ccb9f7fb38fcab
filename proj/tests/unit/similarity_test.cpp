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

#include <Eigen/Dense>

#include "fsd/errors.hpp"
#include "fsd/numerics/finite_diff.hpp"
#include "fsd/numerics/ops.hpp"
#include "fsd/similarity.hpp"
#include "test_util.hpp"

namespace fsd::sim {
namespace {

using num::Tensor;
using testing::cka_double_sum;
using testing::hsic_double_sum;
using testing::randn;
using testing::random_orthogonal;
using testing::rows_of;

TEST(Gram, IdentityAndHandProduct) {
  Tensor k = gram(Tensor::identity(2));
  EXPECT_EQ(k.to_vector(), (std::vector<double>{1, 0, 0, 1}));
  Tensor k2 = gram(Tensor::from({2, 2}, {1, 1, 2, 2}));
  EXPECT_EQ(k2.to_vector(), (std::vector<double>{2, 4, 4, 8}));
}

TEST(Gram, SymmetricPositiveSemidefinite) {
  Tensor k = gram(randn({5, 3}, 7));
  Eigen::MatrixXd m(5, 5);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      EXPECT_EQ(k.at(i, j), k.at(j, i));
      m(i, j) = k.at(i, j);
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
}

TEST(Gram, RequiresTwoExamples) { EXPECT_THROW(gram(Tensor::zeros({1, 3})), ShapeError); }

TEST(Hsic, AllOnesKernelGivesZero) {
  Tensor k = gram(randn({4, 3}, 1));
  EXPECT_NEAR(hsic(k, Tensor::filled({4, 4}, 1.0)).item(), 0.0, 1e-12);
}

TEST(Hsic, Symmetric) {
  Tensor k = gram(randn({6, 3}, 2)), l = gram(randn({6, 5}, 3));
  EXPECT_NEAR(hsic(k, l).item(), hsic(l, k).item(), 1e-12);
}

TEST(Hsic, MatchesDoubleSumOracle) {
  Tensor e = Tensor::from({3, 2}, {1, 0, 0, 1, 1, 1});
  EXPECT_NEAR(hsic(gram(e), gram(e)).item(), hsic_double_sum(rows_of(e), rows_of(e)), 1e-12);
  for (std::size_t n = 2; n <= 8; ++n) {
    Tensor a = randn({n, 3}, 10 + n), b = randn({n, 4}, 20 + n);
    EXPECT_NEAR(hsic(gram(a), gram(b)).item(), hsic_double_sum(rows_of(a), rows_of(b)), 1e-12);
  }
}

TEST(Hsic, RejectsMismatchedOrders) {
  EXPECT_THROW(hsic(Tensor::zeros({3, 3}), Tensor::zeros({4, 4})), ShapeError);
}

TEST(Cka, SelfSimilarityIsOne) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    Tensor x = randn({6, 4}, s);
    EXPECT_NEAR(cka(x, x).item(), 1.0, 1e-10);
  }
}

TEST(Cka, OrthogonalAndIsotropicInvariance) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    Tensor x = randn({7, 5}, 100 + s), y = randn({7, 3}, 200 + s);
    Tensor q = random_orthogonal(5, 300 + s);
    const double base = cka(x, y).item();
    EXPECT_NEAR(cka(num::matmul(x, q), y).item(), base, 1e-8);
    EXPECT_NEAR(cka(num::scale(x, -3.7), y).item(), base, 1e-8);
    EXPECT_NEAR(cka(num::matmul(x, q), x).item(), 1.0, 1e-8);
  }
}

TEST(Cka, ScaledCopyAndPerturbedOracle) {
  Tensor e1 = Tensor::from({3, 2}, {1, 0, 0, 1, 1, 1});
  Tensor e2 = Tensor::from({3, 2}, {2, 0, 0, 2, 2, 2});
  EXPECT_NEAR(cka(e1, e2).item(), 1.0, 1e-12);
  Tensor e3 = Tensor::from({3, 2}, {2, 0.3, 0, 2, 2, 1.5});
  EXPECT_NEAR(cka(e1, e3).item(), cka_double_sum(e1, e3), 1e-12);
}

TEST(Cka, SymmetricAndBounded) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    Tensor a = randn({5, 4}, s), b = randn({5, 6}, s + 50);
    const double v = cka(a, b).item();
    EXPECT_NEAR(v, cka(b, a).item(), 1e-12);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0 + 1e-10);
  }
}

TEST(Cka, DegenerateFeaturesThrow) {
  Tensor same_rows = Tensor::from({3, 2}, {1, 2, 1, 2, 1, 2});
  EXPECT_THROW(cka(same_rows, randn({3, 2}, 1)), DegenerateFeatures);
}

TEST(Cka, GradientMatchesFiniteDifferences) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    Tensor a = testing::randu({4, 6}, s, true);
    Tensor b = testing::randu({4, 6}, s + 77);
    num::backward(cka(a, b));
    Tensor fd = num::finite_diff_grad([&](const Tensor& x) { return cka(x, b).item(); }, a);
    EXPECT_LT(num::relative_error(a.grad(), fd.to_vector()), 1e-4) << "seed " << s;
  }
}

TEST(CkaPerSample, IdenticalInputsGiveOnes) {
  Tensor h = randn({3, 4, 3}, 5);
  PerSampleCka p = cka_per_sample(h, h);
  for (const Tensor& v : p.values) EXPECT_NEAR(v.item(), 1.0, 1e-10);
  EXPECT_EQ(p.valid_count(), 3u);
}

TEST(CkaPerSample, MatchesIndependentCalls) {
  Tensor t = randn({2, 4, 3}, 8), s = randn({2, 4, 3}, 9);
  PerSampleCka p = cka_per_sample(t, s);
  for (std::size_t i = 0; i < 2; ++i) {
    std::vector<double> ti(t.data().begin() + i * 12, t.data().begin() + (i + 1) * 12);
    std::vector<double> si(s.data().begin() + i * 12, s.data().begin() + (i + 1) * 12);
    EXPECT_NEAR(p.values[i].item(),
                cka(Tensor::from({4, 3}, si), Tensor::from({4, 3}, ti)).item(), 1e-14);
  }
  Tensor t1 = num::slice_rows(t, 0, 1), s1 = num::slice_rows(s, 0, 1);
  EXPECT_NEAR(cka_per_sample(t1, s1).values[0].item(),
              cka(num::reshape(s1, {4, 3}), num::reshape(t1, {4, 3})).item(), 1e-14);
}

TEST(CkaPerSample, FlagsDegenerateSample) {
  std::vector<double> v = randn({2, 3, 2}, 4).to_vector();
  for (std::size_t i = 6; i < 12; ++i) v[i] = 0.0;
  Tensor t = Tensor::from({2, 3, 2}, v);
  PerSampleCka p = cka_per_sample(t, t);
  EXPECT_FALSE(p.degenerate[0]);
  EXPECT_TRUE(p.degenerate[1]);
  EXPECT_EQ(p.valid_count(), 1u);
}

}  // namespace
}  // namespace fsd::sim
