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

#pragma once

#include <cstddef>
#include <vector>

#include "fsd/numerics/tensor.hpp"

// Linear-kernel HSIC and CKA. Feature matrices are [examples x width]; the
// kernel is the example-by-example Gram E * E^T.
namespace fsd::sim {

using num::Tensor;

// HSIC(K, K) below this marks a feature matrix as degenerate.
inline constexpr double kDenominatorEps = 1e-12;
// Floor applied to CKA before any logarithm.
inline constexpr double kCkaFloor = 1e-7;

// [N x F] -> [N x N], K = E * E^T. Requires N >= 2.
Tensor gram(const Tensor& features);

// C_N = I_N - J_N / N.
Tensor centering_matrix(std::size_t n);

// tr(K C L C) / (N - 1)^2 for square K, L of the same order N >= 2.
Tensor hsic(const Tensor& k, const Tensor& l);

// HSIC(K, L) / sqrt(HSIC(K, K) * HSIC(L, L)) with K, L the Grams of e1, e2.
// Throws DegenerateFeatures when either self-HSIC is below kDenominatorEps.
Tensor cka(const Tensor& e1, const Tensor& e2);

// Non-differentiable convenience wrapper.
double cka_value(const Tensor& e1, const Tensor& e2);

// Per-sample token-level CKA of two [B x W x D] tensors: entry i compares the
// W x D token matrices of sample i. Degenerate samples carry an undefined
// tensor and a set flag.
struct PerSampleCka {
  std::vector<Tensor> values;
  std::vector<bool> degenerate;

  std::size_t valid_count() const;
};

PerSampleCka cka_per_sample(const Tensor& teacher, const Tensor& student);

}  // namespace fsd::sim
