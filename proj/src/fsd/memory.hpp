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
#include <utility>
#include <vector>

#include "fsd/numerics/tensor.hpp"

namespace fsd::mem {

using num::Tensor;

enum class MemorySource { kTeacher, kStudent };

// Centroid rows [C x width].
struct MemoryBank {
  Tensor centroids;
  bool trainable = false;
  MemorySource source = MemorySource::kTeacher;

  std::size_t size() const { return centroids.dim(0); }
  std::size_t width() const { return centroids.dim(1); }
};

struct ClusteringReport {
  // Sum of squared distances after each assign+update epoch.
  std::vector<double> objective;
  // Members per centroid under the final assignment.
  std::vector<std::size_t> counts;
  std::size_t epochs_run = 0;
  // Empty clusters re-seeded over the whole run.
  std::size_t reseeded = 0;
};

inline constexpr double kStudentInitStd = 0.02;
inline constexpr std::size_t kDefaultKmeansEpochs = 3;

// Nearest centroid per row; ties go to the lowest index.
std::vector<std::size_t> assign(const Tensor& features, const Tensor& centroids);

// Member means. An empty cluster is moved onto the point farthest from its
// assigned centroid; several empty clusters take distinct points in order of
// decreasing distance. `reseeded`, when given, counts such moves.
Tensor update(const Tensor& features, const std::vector<std::size_t>& assignment,
              const Tensor& centroids, std::size_t* reseeded = nullptr);

double objective(const Tensor& features, const Tensor& centroids,
                 const std::vector<std::size_t>& assignment);

// Lloyd's k-means over [N x width] features. Centroids start at C distinct
// rows drawn from the "memory" substream of `seed`. Returns a frozen bank.
std::pair<MemoryBank, ClusteringReport> post_train_teacher_memory(
    const Tensor& features, std::size_t clusters, std::size_t epochs, std::uint64_t seed);

// Trainable bank with Normal(0, stddev^2) entries.
MemoryBank init_student_memory(std::size_t clusters, std::size_t width, std::uint64_t seed,
                               double stddev = kStudentInitStd);

}  // namespace fsd::mem
