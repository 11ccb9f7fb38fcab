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

#include "fsd/similarity.hpp"

#include <algorithm>
#include <string>

#include "fsd/errors.hpp"
#include "fsd/numerics/ops.hpp"

namespace fsd::sim {

namespace {

Tensor as_matrix(const Tensor& e) {
  if (e.rank() == 2) return e;
  if (e.rank() < 2) throw ShapeError("similarity: feature matrix needs rank >= 2");
  return num::reshape(e, {e.dim(0), e.size() / e.dim(0)});
}

// Self-HSIC of a Gram, checked against the degeneracy threshold.
Tensor checked_self_hsic(const Tensor& k, const char* which) {
  Tensor h = hsic(k, k);
  if (h.item() < kDenominatorEps) {
    throw DegenerateFeatures(std::string("cka: ") + which +
                             " features have a vanishing centered Gram");
  }
  return h;
}

}  // namespace

Tensor gram(const Tensor& features) {
  Tensor e = as_matrix(features);
  if (e.dim(0) < 2) throw ShapeError("gram: at least two examples are required");
  return num::matmul(e, num::transpose(e));
}

Tensor centering_matrix(std::size_t n) {
  std::vector<double> c(n * n, -1.0 / static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) c[i * n + i] += 1.0;
  return Tensor::from({n, n}, std::move(c));
}

Tensor hsic(const Tensor& k, const Tensor& l) {
  if (k.rank() != 2 || l.rank() != 2 || k.dim(0) != k.dim(1) || l.shape() != k.shape()) {
    throw ShapeError("hsic: expects two square matrices of the same order, got " +
                     num::shape_string(k.shape()) + " and " + num::shape_string(l.shape()));
  }
  const std::size_t n = k.dim(0);
  if (n < 2) throw ShapeError("hsic: order must be at least 2");
  const Tensor c = centering_matrix(n);
  const double norm = 1.0 / static_cast<double>((n - 1) * (n - 1));
  Tensor kc = num::matmul(k, c);
  Tensor lc = num::matmul(l, c);
  return num::scale(num::trace(num::matmul(kc, lc)), norm);
}

Tensor cka(const Tensor& e1, const Tensor& e2) {
  Tensor a = as_matrix(e1);
  Tensor b = as_matrix(e2);
  if (a.dim(0) != b.dim(0)) {
    throw ShapeError("cka: example counts differ (" + std::to_string(a.dim(0)) + " vs " +
                     std::to_string(b.dim(0)) + ")");
  }
  Tensor k = gram(a);
  Tensor l = gram(b);
  Tensor kk = checked_self_hsic(k, "first");
  Tensor ll = checked_self_hsic(l, "second");
  return num::div(hsic(k, l), num::sqrt(num::mul(kk, ll)));
}

double cka_value(const Tensor& e1, const Tensor& e2) {
  num::NoGradGuard guard;
  return cka(e1, e2).item();
}

std::size_t PerSampleCka::valid_count() const {
  return static_cast<std::size_t>(std::count(degenerate.begin(), degenerate.end(), false));
}

PerSampleCka cka_per_sample(const Tensor& teacher, const Tensor& student) {
  if (teacher.rank() != 3 || teacher.shape() != student.shape()) {
    throw ShapeError("cka_per_sample: expects two [B x W x D] tensors of equal shape, got " +
                     num::shape_string(teacher.shape()) + " and " +
                     num::shape_string(student.shape()));
  }
  const std::size_t batch = teacher.dim(0), w = teacher.dim(1), d = teacher.dim(2);
  PerSampleCka out;
  out.values.resize(batch);
  out.degenerate.assign(batch, false);
  for (std::size_t i = 0; i < batch; ++i) {
    Tensor ti = num::reshape(num::slice_rows(teacher, i, 1), {w, d});
    Tensor si = num::reshape(num::slice_rows(student, i, 1), {w, d});
    try {
      // Student first, matching the loss definition; CKA is symmetric.
      out.values[i] = cka(si, ti);
    } catch (const DegenerateFeatures&) {
      out.degenerate[i] = true;
    }
  }
  return out;
}

}  // namespace fsd::sim
