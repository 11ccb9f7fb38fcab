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

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fsd/data.hpp"
#include "fsd/losses.hpp"
#include "fsd/model.hpp"

namespace fsd::analysis {

using num::Tensor;

// sum_ij |psi(Ht_i, Ht_j) - psi(Hs_i, Hs_j)| / B^2 over flattened rows.
double relation_difference_inter(const Tensor& teacher, const Tensor& student, loss::Psi psi);

// sum_ijk |psi(Ht_ij, Ht_ik) - psi(Hs_ij, Hs_ik)| / (W^2 * B) on [B x W x D].
double relation_difference_intra(const Tensor& teacher, const Tensor& student, loss::Psi psi);

struct RdSample {
  std::size_t step = 0;
  double e_intra = 0.0;
  double e_inter = 0.0;
  double c_intra = 0.0;
  double c_inter = 0.0;

  std::array<double, 4> values() const { return {e_intra, e_inter, c_intra, c_inter}; }
};

// All four variants on one pair of [B x W x D] feature tensors.
RdSample relation_differences(const Tensor& teacher, const Tensor& student);

// Mean of the four variants over evaluation batches (eval-mode forwards).
RdSample evaluate_rd(const model::EncoderParams& teacher, const model::EncoderConfig& teacher_config,
                     const model::EncoderParams& student, const model::EncoderConfig& student_config,
                     std::span<const model::Batch> batches);

struct Checkpointed {
  std::size_t step = 0;
  model::EncoderParams params;
};

// One RdSample per checkpointed student, in the given order.
std::vector<RdSample> rd_curve(const model::EncoderParams& teacher, const model::EncoderConfig& teacher_config,
                               std::span<const Checkpointed> students,
                               const model::EncoderConfig& student_config,
                               std::span<const model::Batch> batches);

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // teacher predictions of this class
  // Zero denominators; the metric is reported as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

struct RestorationReport {
  std::vector<ClassScores> classes;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  bool any_undefined = false;
};

// Student predictions scored against teacher predictions as ground truth.
RestorationReport restoration_rate(std::span<const std::int32_t> teacher_preds,
                                   std::span<const std::int32_t> student_preds, std::size_t n_classes);

struct HeatmapMatrix {
  std::size_t size = 0;        // P
  std::vector<double> values;  // P x P, row = teacher batch, column = other batch
  std::vector<bool> missing;   // degenerate pixels
  std::size_t missing_count = 0;
  double diagonal_average = 0.0;
  std::size_t diagonal_count = 0;  // non-missing diagonal pixels

  double at(std::size_t i, std::size_t j) const { return values[i * size + j]; }
};

// P consecutive batches of `batch_size` from a "pool"-stream shuffle of `ds`.
std::vector<model::Batch> heatmap_pool(const data::Dataset& ds, std::size_t pool_size,
                                       std::size_t batch_size, std::uint64_t seed);

// Features of one model on each pool batch, flattened to [B x W*D].
std::vector<Tensor> pool_features(const model::EncoderParams& params, const model::EncoderConfig& config,
                                  std::span<const model::Batch> pool);

// Pixel (i, j) = CKA(teacher features on batch i, other features on batch j).
HeatmapMatrix cka_heatmap(std::span<const Tensor> teacher_features, std::span<const Tensor> other_features);
HeatmapMatrix cka_heatmap(const model::EncoderParams& teacher, const model::EncoderConfig& teacher_config,
                          const model::EncoderParams& other, const model::EncoderConfig& other_config,
                          std::span<const model::Batch> pool);

// Ascending ranks with ties sharing their average rank.
std::vector<double> average_ranks(std::span<const double> values);

// Ranks every RD variant across methods and averages each method's 4 ranks.
std::map<std::string, double> rank_table(const std::map<std::string, std::array<double, 4>>& final_rd);

// Mean of per-task average ranks for each method.
std::map<std::string, double> mean_over_tasks(const std::map<std::string, std::vector<double>>& per_task);

}  // namespace fsd::analysis
