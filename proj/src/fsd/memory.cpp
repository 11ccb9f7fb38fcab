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

#include "fsd/memory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fsd/errors.hpp"
#include "fsd/rng.hpp"

namespace fsd::mem {

namespace {

double squared_distance(const double* a, const double* b, std::size_t width) {
  double s = 0.0;
  for (std::size_t f = 0; f < width; ++f) {
    const double d = a[f] - b[f];
    s += d * d;
  }
  return s;
}

void check_matrix(const Tensor& t, const char* what) {
  if (!t.defined() || t.rank() != 2) throw ShapeError(std::string(what) + " must be a matrix");
}

void check_widths(const Tensor& features, const Tensor& centroids) {
  check_matrix(features, "features");
  check_matrix(centroids, "centroids");
  if (features.dim(1) != centroids.dim(1)) {
    throw ShapeError("k-means: feature width " + std::to_string(features.dim(1)) +
                     " differs from centroid width " + std::to_string(centroids.dim(1)));
  }
}

}  // namespace

std::vector<std::size_t> assign(const Tensor& features, const Tensor& centroids) {
  check_widths(features, centroids);
  const std::size_t n = features.dim(0), c = centroids.dim(0), w = features.dim(1);
  const double* f = features.data().data();
  const double* m = centroids.data().data();
  std::vector<std::size_t> out(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    double best = squared_distance(f + i * w, m, w);
    for (std::size_t j = 1; j < c; ++j) {
      const double d = squared_distance(f + i * w, m + j * w, w);
      if (d < best) {
        best = d;
        out[i] = j;
      }
    }
  }
  return out;
}

Tensor update(const Tensor& features, const std::vector<std::size_t>& assignment,
              const Tensor& centroids, std::size_t* reseeded) {
  check_widths(features, centroids);
  const std::size_t n = features.dim(0), c = centroids.dim(0), w = features.dim(1);
  if (assignment.size() != n) throw ShapeError("update: assignment length differs from N");
  const double* f = features.data().data();
  const double* m = centroids.data().data();
  std::vector<double> sums(c * w, 0.0);
  std::vector<std::size_t> counts(c, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t a = assignment[i];
    if (a >= c) throw ShapeError("update: assignment index out of range");
    ++counts[a];
    for (std::size_t k = 0; k < w; ++k) sums[a * w + k] += f[i * w + k];
  }
  std::vector<double> out(c * w);
  std::vector<std::size_t> empty;
  for (std::size_t j = 0; j < c; ++j) {
    if (counts[j] == 0) {
      empty.push_back(j);
      continue;
    }
    const double inv = static_cast<double>(counts[j]);
    for (std::size_t k = 0; k < w; ++k) out[j * w + k] = sums[j * w + k] / inv;
  }
  if (!empty.empty()) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i) dist[i] = squared_distance(f + i * w, m + assignment[i] * w, w);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dist[a] > dist[b]; });
    for (std::size_t e = 0; e < empty.size(); ++e) {
      const std::size_t src = order[e % n];
      std::copy(f + src * w, f + (src + 1) * w, out.begin() + empty[e] * w);
    }
    if (reseeded) *reseeded += empty.size();
  }
  return Tensor::from({c, w}, std::move(out));
}

double objective(const Tensor& features, const Tensor& centroids,
                 const std::vector<std::size_t>& assignment) {
  check_widths(features, centroids);
  const std::size_t w = features.dim(1);
  const double* f = features.data().data();
  const double* m = centroids.data().data();
  double s = 0.0;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    s += squared_distance(f + i * w, m + assignment[i] * w, w);
  }
  return s;
}

std::pair<MemoryBank, ClusteringReport> post_train_teacher_memory(
    const Tensor& features, std::size_t clusters, std::size_t epochs, std::uint64_t seed) {
  check_matrix(features, "features");
  const std::size_t n = features.dim(0), w = features.dim(1);
  if (clusters < 2) throw UsageError("memory: at least 2 centroids are required");
  if (n < clusters) {
    throw UsageError("memory: " + std::to_string(n) + " features cannot seed " +
                     std::to_string(clusters) + " centroids");
  }
  // Partial Fisher-Yates picks C distinct rows.
  Rng rng(derive_seed(seed, "memory", 0));
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  for (std::size_t i = 0; i < clusters; ++i) std::swap(rows[i], rows[i + rng.below(n - i)]);
  std::vector<double> init(clusters * w);
  const double* f = features.data().data();
  for (std::size_t j = 0; j < clusters; ++j) {
    std::copy(f + rows[j] * w, f + (rows[j] + 1) * w, init.begin() + j * w);
  }
  Tensor centroids = Tensor::from({clusters, w}, std::move(init));

  ClusteringReport report;
  std::vector<std::size_t> a;
  for (std::size_t e = 0; e < epochs; ++e) {
    a = assign(features, centroids);
    centroids = update(features, a, centroids, &report.reseeded);
    report.objective.push_back(objective(features, centroids, a));
    ++report.epochs_run;
  }
  if (a.empty()) a = assign(features, centroids);
  report.counts.assign(clusters, 0);
  for (std::size_t v : a) ++report.counts[v];

  MemoryBank bank{centroids, false, MemorySource::kTeacher};
  return {std::move(bank), std::move(report)};
}

MemoryBank init_student_memory(std::size_t clusters, std::size_t width, std::uint64_t seed,
                               double stddev) {
  if (clusters < 2) throw UsageError("memory: at least 2 centroids are required");
  if (width == 0) throw UsageError("memory: width must be positive");
  Rng rng(derive_seed(seed, "memory", 1));
  std::vector<double> v(clusters * width);
  for (auto& x : v) x = rng.normal(0.0, stddev);
  return MemoryBank{Tensor::from({clusters, width}, std::move(v), true), true,
                    MemorySource::kStudent};
}

}  // namespace fsd::mem
