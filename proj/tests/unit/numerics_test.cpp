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

#include <cmath>
#include <vector>

#include "fsd/errors.hpp"
#include "fsd/numerics/finite_diff.hpp"
#include "fsd/numerics/ops.hpp"
#include "fsd/numerics/tensor.hpp"
#include "test_util.hpp"

namespace fsd::num {
namespace {

using fsd::testing::randn;

TEST(Matmul, MatchesTripleLoop) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const std::size_t m = 3 + seed, k = 4 + 2 * seed, n = 5;
    Tensor a = randn({m, k}, seed);
    Tensor b = randn({k, n}, seed + 100);
    Tensor c = matmul(a, b);
    ASSERT_EQ(c.shape(), (Shape{m, n}));
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double ref = 0.0;
        for (std::size_t t = 0; t < k; ++t) ref += a.at(i, t) * b.at(t, j);
        EXPECT_NEAR(c.at(i, j), ref, 1e-12 * (1.0 + std::abs(ref)));
      }
    }
  }
}

TEST(Matmul, RejectsMismatchedInnerDims) {
  EXPECT_THROW(matmul(Tensor::zeros({2, 3}), Tensor::zeros({4, 2})), ShapeError);
}

TEST(Softmax, MatchesLongDoubleReference) {
  Tensor x = Tensor::from({2, 4}, {1.0, 2.0, 3.0, 4.0, -50.0, 700.0, 699.0, 0.0});
  for (double tau : {0.5, 1.0, 5.0}) {
    Tensor p = softmax_rows(x, tau);
    Tensor lp = log_softmax_rows(x, tau);
    for (std::size_t r = 0; r < 2; ++r) {
      long double mx = -1e300L;
      for (std::size_t c = 0; c < 4; ++c) mx = std::max<long double>(mx, x.at(r, c) / tau);
      long double z = 0.0L;
      for (std::size_t c = 0; c < 4; ++c) z += std::exp(static_cast<long double>(x.at(r, c)) / tau - mx);
      double row_sum = 0.0;
      for (std::size_t c = 0; c < 4; ++c) {
        const long double ref = std::exp(static_cast<long double>(x.at(r, c)) / tau - mx) / z;
        EXPECT_NEAR(p.at(r, c), static_cast<double>(ref), 1e-15);
        const long double lref = static_cast<long double>(x.at(r, c)) / tau - mx - std::log(z);
        EXPECT_NEAR(lp.at(r, c), static_cast<double>(lref), 1e-12 * (1.0 + std::abs((double)lref)));
        row_sum += p.at(r, c);
      }
      EXPECT_NEAR(row_sum, 1.0, 1e-14);
    }
  }
}

TEST(Autodiff, RejectsNonScalarRoot) {
  Tensor a = randn({2, 2}, 1, true);
  EXPECT_THROW(backward(scale(a, 2.0)), GraphError);
}

TEST(Autodiff, SecondBackwardWithoutZeroGradThrows) {
  Tensor a = randn({3}, 2, true);
  backward(sum(square(a)));
  EXPECT_THROW(backward(sum(square(a))), GraphError);
  a.zero_grad();
  EXPECT_NO_THROW(backward(sum(square(a))));
}

TEST(Autodiff, ConsumedRootThrows) {
  Tensor a = randn({3}, 3, true);
  Tensor l = sum(a);
  backward(l);
  a.zero_grad();
  EXPECT_THROW(backward(l), GraphError);
}

TEST(Autodiff, NoGradGuardStopsRecording) {
  Tensor a = randn({3}, 4, true);
  NoGradGuard guard;
  Tensor l = sum(square(a));
  EXPECT_FALSE(l.requires_grad());
}

TEST(Autodiff, NonFiniteResultThrows) {
  Tensor a = Tensor::from({1}, {800.0});
  EXPECT_THROW(exp(a), NonFiniteError);
  EXPECT_THROW(log(Tensor::from({1}, {0.0})), DomainError);
  EXPECT_THROW(sqrt(Tensor::from({1}, {-1.0})), DomainError);
  EXPECT_THROW(div(a, Tensor::scalar(0.0)), DomainError);
}

TEST(Autodiff, GradOfSharedSubexpressionAccumulates) {
  Tensor a = Tensor::from({2}, {1.5, -2.0}, true);
  Tensor b = mul(a, a);
  backward(sum(add(b, b)));
  EXPECT_DOUBLE_EQ(a.grad()[0], 6.0);
  EXPECT_DOUBLE_EQ(a.grad()[1], -8.0);
}

// Gradient checks over 20 seeds for every differentiable op.
struct GradCase {
  const char* name;
  Shape shape;
  std::function<Tensor(const Tensor&)> f;
};

std::vector<GradCase> grad_cases() {
  static const std::vector<std::int32_t> ids = {0, 2, 1, 2};
  static const std::vector<std::int32_t> labels = {1, 0, 2};
  static const std::vector<std::uint8_t> mask = {1, 1, 1, 0, 1, 1, 0, 0};
  return {
      {"matmul", {3, 4}, [](const Tensor& x) { return sum(square(matmul(x, transpose(x)))); }},
      {"div", {5}, [](const Tensor& x) { return sum(div(x, add_scalar(square(x), 1.0))); }},
      {"log_sqrt", {4}, [](const Tensor& x) { return sum(log(add_scalar(sqrt(add_scalar(square(x), 0.5)), 0.1))); }},
      {"exp", {4}, [](const Tensor& x) { return mean(exp(scale(x, 0.3))); }},
      {"trace", {3, 3}, [](const Tensor& x) { return trace(matmul(x, x)); }},
      {"l2_norm", {6}, [](const Tensor& x) { return l2_norm(x); }},
      {"softmax", {3, 4}, [](const Tensor& x) {
         return sum(mul(softmax_rows(x, 2.0), Tensor::from({3, 4}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12})));
       }},
      {"log_softmax", {3, 4}, [](const Tensor& x) { return sum(square(log_softmax_rows(x, 0.7))); }},
      {"layer_norm", {3, 5}, [](const Tensor& x) {
         Tensor g = Tensor::from({5}, {1.0, 0.5, -1.0, 2.0, 0.3});
         Tensor b = Tensor::from({5}, {0.1, 0.2, 0.3, 0.4, 0.5});
         return sum(square(mul(layer_norm_rows(x, g, b), x)));
       }},
      {"gelu", {7}, [](const Tensor& x) { return sum(gelu(x)); }},
      {"gather", {3, 2}, [](const Tensor& x) { return sum(square(gather_rows(x, ids))); }},
      {"attention", {8, 4}, [](const Tensor& x) {
         return sum(square(multihead_attention(x, scale(x, 0.5), square(x), mask, 2, 4, 2)));
       }},
      {"mean_pool", {8, 3}, [](const Tensor& x) { return sum(square(masked_mean_pool(x, mask, 2, 4))); }},
      {"zero_masked", {8, 3}, [](const Tensor& x) { return sum(square(zero_masked_rows(x, mask))); }},
      {"cross_entropy", {3, 3}, [](const Tensor& x) { return cross_entropy(x, labels); }},
      {"euclidean", {4, 3}, [](const Tensor& x) {
         return sum(pairwise_euclidean(x, add_scalar(slice_rows(x, 1, 3), 0.25)));
       }},
      {"cosine", {4, 3}, [](const Tensor& x) { return sum(pairwise_cosine(x, slice_rows(x, 0, 2))); }},
      {"reshape_stack", {2, 3}, [](const Tensor& x) {
         Tensor r = reshape(x, {3, 2});
         return sum(square(stack({trace(slice_rows(r, 0, 2)), sum(x)})));
       }},
      {"row_broadcast", {3, 2}, [](const Tensor& x) {
         return sum(square(add_row_broadcast(x, slice_rows(reshape(x, {6}), 0, 2))));
       }},
  };
}

TEST(Autodiff, GradientsMatchFiniteDifferencesOver20Seeds) {
  for (const GradCase& c : grad_cases()) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Tensor x = randn(c.shape, 1000 + seed, true);
      backward(c.f(x));
      Tensor fd = finite_diff_grad([&](const Tensor& p) { return c.f(p).item(); }, x);
      const double err = relative_error(x.grad(), fd.to_vector());
      EXPECT_LT(err, 1e-6) << c.name << " seed " << seed;
    }
  }
}

TEST(Masking, ZeroMaskedRowsAreExactZeros) {
  std::vector<std::uint8_t> mask = {1, 0, 1};
  Tensor x = randn({3, 4}, 9);
  Tensor y = zero_masked_rows(x, mask);
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_EQ(y.at(1, j), 0.0);
    EXPECT_FALSE(std::signbit(y.at(1, j)));
    EXPECT_EQ(y.at(0, j), x.at(0, j));
  }
}

TEST(Attention, MaskedKeysDoNotInfluenceOutput) {
  std::vector<std::uint8_t> mask = {1, 1, 0, 0};
  Tensor q = randn({4, 4}, 11);
  Tensor v1 = randn({4, 4}, 12);
  std::vector<double> alt = v1.to_vector();
  for (std::size_t j = 0; j < 4; ++j) alt[3 * 4 + j] += 10.0;
  Tensor v2 = Tensor::from({4, 4}, alt);
  Tensor o1 = multihead_attention(q, q, v1, mask, 1, 4, 2);
  Tensor o2 = multihead_attention(q, q, v2, mask, 1, 4, 2);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(o1.at(0, j), o2.at(0, j));
}

}  // namespace
}  // namespace fsd::num
