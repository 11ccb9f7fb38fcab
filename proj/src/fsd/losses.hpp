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

#include <string_view>

#include "fsd/numerics/tensor.hpp"

// Distillation objectives. Teacher-side arguments are always treated as
// constants: they are detached before entering any expression.
namespace fsd::loss {

using num::Tensor;

enum class LossKind { kNoDS, kVKD, kIntra, kLocal, kGlobal, kIntraLocal, kIntraLocalGlobal };

std::string_view to_string(LossKind kind);
// Accepts "noDS", "VKD", "I", "L", "G", "IL", "ILG" (case-insensitive).
LossKind parse_loss_kind(std::string_view text);

bool uses_intra(LossKind kind);
bool uses_local(LossKind kind);
bool uses_global(LossKind kind);
bool uses_teacher(LossKind kind);

struct LossWeights {
  double alpha = 0.5;
  double tau = 5.0;
  double beta = 1.0;
  double gamma_m = 0.5;
  double gamma_i = 1.0;
  double gamma_l = 1.0;
  double gamma_g = 1.0;
  // Multiplies the KL term by tau^2 as many KD codebases do. Off by default.
  bool tau_squared = false;

  // Range checks; for IL the global weight must be zero.
  void validate(LossKind kind) const;
};

enum class Psi { kEuclidean, kCosine };

// Norm floor of the cosine relation.
inline constexpr double kCosineEps = 1e-12;

// Pairwise relation matrix psi(a_i, b_j) for a[n x f], b[m x f].
Tensor relation(const Tensor& a, const Tensor& b, Psi psi);

// sum_i KL(softmax(t_i / tau) || softmax(s_i / tau)) over the batch.
Tensor kld(const Tensor& teacher_logits, const Tensor& student_logits, double tau,
           bool tau_squared = false);

// alpha * ce + (1 - alpha) * kld
Tensor vkd(const Tensor& ce, const Tensor& kld_term, double alpha);

// -(1/B') sum_i log(clamp(CKA(Hs_i, Ht_i))) over non-degenerate samples of
// [B x W x D] inputs. Throws DegenerateBatch when no sample is usable.
Tensor fsd_intra(const Tensor& teacher_hidden, const Tensor& student_hidden);

// -log(clamp(CKA(Hs, Ht))) on [B x W*D] (any trailing shape is flattened).
Tensor fsd_local(const Tensor& teacher_hidden, const Tensor& student_hidden);

// -log(clamp(CKA(Mt, Ms))).
Tensor memory_structure_loss(const Tensor& teacher_memory, const Tensor& student_memory);

// sum_ij (psi(Ht_i, Mt_j) - psi(Hs_i, Ms_j))^2 / (B * C).
Tensor memory_hidden_loss(const Tensor& teacher_hidden, const Tensor& student_hidden,
                          const Tensor& teacher_memory, const Tensor& student_memory, Psi psi);

struct GlobalTerms {
  Tensor hidden_euclidean;
  Tensor hidden_cosine;
  Tensor structure;
  Tensor total;
};

// gamma_m * F_Mh(euclidean) + (1 - gamma_m) * F_Mh(cosine) + F_MM.
GlobalTerms fsd_global_terms(const Tensor& teacher_hidden, const Tensor& student_hidden,
                             const Tensor& teacher_memory, const Tensor& student_memory,
                             double gamma_m);
Tensor fsd_global(const Tensor& teacher_hidden, const Tensor& student_hidden,
                  const Tensor& teacher_memory, const Tensor& student_memory, double gamma_m);

// gamma_i * li + gamma_l * ll + gamma_g * lg. A term may be left undefined
// when its weight is zero.
Tensor fsd_integrated(const Tensor& li, const Tensor& ll, const Tensor& lg, double gamma_i,
                      double gamma_l, double gamma_g);

// vkd + beta * structure.
Tensor total_loss(const Tensor& vkd_term, const Tensor& structure, double beta);

}  // namespace fsd::loss
