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
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fsd/numerics/tensor.hpp"
#include "fsd/rng.hpp"

namespace fsd::model {

using num::Tensor;

enum class Pooling { kMean, kFirstToken };

std::string_view to_string(Pooling p);
Pooling parse_pooling(std::string_view text);

struct EncoderConfig {
  std::size_t n_layers = 4;
  std::size_t n_heads = 2;
  std::size_t d_model = 32;
  std::size_t d_ff = 64;
  std::size_t vocab_size = 64;
  std::size_t max_seq_len = 16;
  std::size_t n_classes = 2;
  double dropout_rate = 0.0;
  Pooling pooling = Pooling::kMean;

  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

inline constexpr double kInitStd = 0.02;
inline constexpr double kLayerNormEps = 1e-5;

struct LayerParams {
  Tensor ln1_gain, ln1_bias;
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor ln2_gain, ln2_bias;
  Tensor w1, b1, w2, b2;
};

// Weight matrices are stored [in x out]: y = x * W + b.
struct EncoderParams {
  Tensor token_embedding;     // [vocab x D]
  Tensor position_embedding;  // [W x D]
  std::vector<LayerParams> layers;
  Tensor final_gain, final_bias;
  Tensor classifier_w;  // [D x n_classes]
  Tensor classifier_b;

  // Stable (name, tensor) listing; the order defines checkpoint layout,
  // optimizer slots and init draws.
  std::vector<std::pair<std::string, Tensor*>> named();
  std::vector<std::pair<std::string, const Tensor*>> named() const;

  // Deep copy into fresh leaves.
  EncoderParams clone(bool requires_grad) const;
  std::size_t parameter_count() const;
};

// Token ids and mask are [size x seq] row-major; mask 1 = real token.
struct Batch {
  std::size_t size = 0;
  std::size_t seq = 0;
  std::vector<std::int32_t> ids;
  std::vector<std::uint8_t> mask;
  std::vector<std::int32_t> labels;

  void validate(const EncoderConfig& config) const;
};

struct ForwardOutput {
  Tensor logits;  // [B x n_classes]
  Tensor hidden;  // [B x W x D], pad rows exactly zero
};

// Dropout is applied only when `dropout_rng` is set and the rate is nonzero.
struct ForwardOptions {
  Rng* dropout_rng = nullptr;
};

ForwardOutput forward(const EncoderParams& params, const EncoderConfig& config, const Batch& batch,
                      const ForwardOptions& options = {});

// Normal(0, 0.02^2) weights and embeddings, zero biases, unit gains.
EncoderParams init_params(const EncoderConfig& config, std::uint64_t seed);

// Copies embeddings, the first student n_layers blocks, the final norm and the
// classifier.
EncoderParams init_student_from_teacher(const EncoderParams& teacher,
                                        const EncoderConfig& teacher_config,
                                        const EncoderConfig& student_config);

}  // namespace fsd::model
