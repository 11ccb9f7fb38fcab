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
#include <functional>
#include <optional>
#include <vector>

#include "fsd/data.hpp"
#include "fsd/losses.hpp"
#include "fsd/memory.hpp"
#include "fsd/model.hpp"

namespace fsd::train {

using num::Tensor;

struct AdamSettings {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Decoupled (AdamW-style) decay; 0 gives plain Adam.
  double weight_decay = 0.0;

  void validate() const;
};

// Adam with bias correction over a fixed list of leaf tensors. A parameter
// without a gradient this step is treated as having a zero gradient.
class Adam {
 public:
  Adam(std::vector<Tensor*> params, AdamSettings settings);

  void step();
  void zero_grad();

  std::size_t steps() const { return t_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

 private:
  std::vector<Tensor*> params_;
  AdamSettings settings_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

struct TeacherTrainConfig {
  std::size_t epochs = 5;
  std::size_t batch_size = 32;
  AdamSettings adam{1e-3};
  std::uint64_t seed = 0;
};

struct EpochSummary {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double train_accuracy = 0.0;
};

struct TeacherResult {
  model::EncoderParams params;
  std::vector<EpochSummary> epochs;
  double train_accuracy = 0.0;
};

// Cross-entropy fine-tuning. Aborts with NonFiniteError if the loss diverges.
TeacherResult fine_tune_teacher(const model::EncoderConfig& config, const TeacherTrainConfig& settings,
                                const data::Dataset& train);

struct DistillConfig {
  loss::LossKind kind = loss::LossKind::kVKD;
  loss::LossWeights weights;
  AdamSettings adam;
  std::size_t epochs = 3;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  std::size_t memory_size = 8;
  std::size_t kmeans_epochs = mem::kDefaultKmeansEpochs;
  double memory_init_std = mem::kStudentInitStd;
  // Calls the checkpoint hook every this many steps (0 = never).
  std::size_t checkpoint_interval = 0;

  void validate() const;
};

// One row per optimizer step. Terms outside the active loss kind stay empty.
struct MetricsRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double total = 0.0;
  double ce = 0.0;
  std::optional<double> kld, vkd;
  std::optional<double> intra, local, global;
  std::optional<double> global_euclidean, global_cosine, memory_structure;
  double batch_accuracy = 0.0;
  std::optional<double> rd_e_intra, rd_e_inter, rd_c_intra, rd_c_inter;
};

struct DistillHooks {
  // Runs after each step; may fill the RD fields of the record.
  std::function<void(MetricsRecord&, const model::EncoderParams&)> on_step;
  std::function<void(std::size_t step, const model::EncoderParams&, const mem::MemoryBank*)>
      on_checkpoint;
};

struct DistillResult {
  model::EncoderParams student;
  std::optional<mem::MemoryBank> student_memory;
  std::vector<MetricsRecord> metrics;
};

// Eval-mode teacher outputs over a dataset, in dataset order.
struct TeacherCache {
  Tensor logits;  // [N x K]
  Tensor hidden;  // [N x W x D]
};

TeacherCache cache_teacher_outputs(const model::EncoderParams& teacher,
                                   const model::EncoderConfig& config, const data::Dataset& ds,
                                   std::size_t batch_size = 64);

// Student training on vkd + beta * structure for the configured kind. The
// teacher runs without gradients and stays untouched; for G and ILG the
// student memory is trained by the same optimizer.
DistillResult distill(const model::EncoderParams& teacher, const model::EncoderConfig& teacher_config,
                      const mem::MemoryBank* teacher_memory, const model::EncoderParams& student_init,
                      const model::EncoderConfig& student_config, const DistillConfig& config,
                      const data::Dataset& train, const DistillHooks& hooks = {});

// Argmax predictions in eval mode.
std::vector<std::int32_t> predict(const model::EncoderParams& params, const model::EncoderConfig& config,
                                  const data::Dataset& ds, std::size_t batch_size = 64);
double accuracy(std::span<const std::int32_t> predictions, std::span<const std::int32_t> labels);

// Shuffled index order of an epoch, drawn from the "shuffle" substream.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch);

}  // namespace fsd::train
