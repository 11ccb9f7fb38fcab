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
#include <cstdint>
#include <span>
#include <vector>

#include "fsd/numerics/tensor.hpp"

// Differentiable operations. Shapes never broadcast implicitly, except that a
// one-element tensor combines with any tensor in the binary arithmetic ops.
namespace fsd::num {

// [m x k] * [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor transpose(const Tensor& a);

Tensor trace(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// Throws DomainError on a non-positive input.
Tensor log(const Tensor& a);
// Throws DomainError on a negative input. The derivative at exactly 0 is
// taken as 0.
Tensor sqrt(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor square(const Tensor& a);
Tensor l2_norm(const Tensor& v);
// Gradient flows only where lo <= a <= hi.
Tensor clamp(const Tensor& a, double lo, double hi);

// Row-wise softmax / log-softmax of logits / tau, max-stabilized.
Tensor softmax_rows(const Tensor& logits, double tau);
Tensor log_softmax_rows(const Tensor& logits, double tau);

Tensor reshape(const Tensor& a, Shape shape);
// Rows [begin, begin + count) of axis 0.
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count);
// Concatenates one-element tensors into a vector.
Tensor stack(const std::vector<Tensor>& scalars);

// x[m x n] + b[n] added to every row.
Tensor add_row_broadcast(const Tensor& x, const Tensor& bias);
// Elementwise product with a constant factor array (dropout masks).
Tensor mul_const(const Tensor& x, std::vector<double> factors);

// Per-row layer normalization over the last axis of a [m x n] input.
Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
// Exact (erf) GELU.
Tensor gelu(const Tensor& x);

// Embedding lookup: rows of table[V x D] selected by ids.
Tensor gather_rows(const Tensor& table, std::span<const std::int32_t> ids);

// Multi-head scaled dot-product attention on packed [batch*seq x D] inputs.
// Keys at masked positions (mask == 0) receive zero weight.
Tensor multihead_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                           std::span<const std::uint8_t> mask, std::size_t batch,
                           std::size_t seq, std::size_t heads);

// Rows where mask == 0 are replaced by exact zeros.
Tensor zero_masked_rows(const Tensor& x, std::span<const std::uint8_t> mask);
// Mean over unmasked positions of each sample: [batch*seq x D] -> [batch x D].
Tensor masked_mean_pool(const Tensor& x, std::span<const std::uint8_t> mask,
                        std::size_t batch, std::size_t seq);
// Position-0 vector of each sample: [batch*seq x D] -> [batch x D].
Tensor first_token_pool(const Tensor& x, std::size_t batch, std::size_t seq);

// Mean negative log-likelihood of integer labels under row softmax.
Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> labels);

// out[i, j] = ||a_i - b_j||_2 for a[n x f], b[m x f].
Tensor pairwise_euclidean(const Tensor& a, const Tensor& b);
// out[i, j] = <a_i, b_j> / (max(||a_i||, eps) * max(||b_j||, eps)).
Tensor pairwise_cosine(const Tensor& a, const Tensor& b, double eps = 1e-12);

}  // namespace fsd::num
