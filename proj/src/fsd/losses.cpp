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

#include "fsd/losses.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "fsd/errors.hpp"
#include "fsd/numerics/ops.hpp"
#include "fsd/similarity.hpp"

namespace fsd::loss {

namespace {

Tensor flatten_rows(const Tensor& t) {
  if (t.rank() == 2) return t;
  return num::reshape(t, {t.dim(0), t.size() / t.dim(0)});
}

// -log(clamp(cka)) with the clamp implementing |.| for a nonnegative CKA.
Tensor neg_log_cka(const Tensor& cka) {
  return num::scale(num::log(num::clamp(cka, sim::kCkaFloor, 1.0)), -1.0);
}

void check_range(bool ok, const char* what) {
  if (!ok) throw UsageError(std::string("loss weights: ") + what);
}

}  // namespace

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kNoDS: return "noDS";
    case LossKind::kVKD: return "VKD";
    case LossKind::kIntra: return "I";
    case LossKind::kLocal: return "L";
    case LossKind::kGlobal: return "G";
    case LossKind::kIntraLocal: return "IL";
    case LossKind::kIntraLocalGlobal: return "ILG";
  }
  return "?";
}

LossKind parse_loss_kind(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  if (s.rfind("FSD_", 0) == 0) s = s.substr(4);
  if (s == "NODS") return LossKind::kNoDS;
  if (s == "VKD") return LossKind::kVKD;
  if (s == "I") return LossKind::kIntra;
  if (s == "L") return LossKind::kLocal;
  if (s == "G") return LossKind::kGlobal;
  if (s == "IL") return LossKind::kIntraLocal;
  if (s == "ILG") return LossKind::kIntraLocalGlobal;
  throw UsageError("unknown loss kind '" + std::string(text) + "' (expected noDS, VKD, I, L, G, IL, ILG)");
}

bool uses_intra(LossKind kind) {
  return kind == LossKind::kIntra || kind == LossKind::kIntraLocal ||
         kind == LossKind::kIntraLocalGlobal;
}

bool uses_local(LossKind kind) {
  return kind == LossKind::kLocal || kind == LossKind::kIntraLocal ||
         kind == LossKind::kIntraLocalGlobal;
}

bool uses_global(LossKind kind) {
  return kind == LossKind::kGlobal || kind == LossKind::kIntraLocalGlobal;
}

bool uses_teacher(LossKind kind) { return kind != LossKind::kNoDS; }

void LossWeights::validate(LossKind kind) const {
  check_range(alpha >= 0.0 && alpha <= 1.0, "alpha must lie in [0, 1]");
  check_range(tau > 0.0, "tau must be positive");
  check_range(beta >= 0.0, "beta must be nonnegative");
  check_range(gamma_m >= 0.0 && gamma_m <= 1.0, "gamma_m must lie in [0, 1]");
  check_range(gamma_i >= 0.0 && gamma_l >= 0.0 && gamma_g >= 0.0,
              "gamma_i, gamma_l, gamma_g must be nonnegative");
  if (kind == LossKind::kIntraLocal) check_range(gamma_g == 0.0, "gamma_g must be 0 for IL");
}

Tensor relation(const Tensor& a, const Tensor& b, Psi psi) {
  return psi == Psi::kEuclidean ? num::pairwise_euclidean(a, b)
                                : num::pairwise_cosine(a, b, kCosineEps);
}

Tensor kld(const Tensor& teacher_logits, const Tensor& student_logits, double tau, bool tau_squared) {
  if (teacher_logits.shape() != student_logits.shape()) {
    throw ShapeError("kld: teacher and student logits differ in shape");
  }
  if (!(tau > 0.0)) throw DomainError("kld: temperature must be positive");
  // Teacher distribution is a constant: p log p is precomputed off-tape.
  Tensor p = num::softmax_rows(teacher_logits.detach(), tau);
  Tensor log_p = num::log_softmax_rows(teacher_logits.detach(), tau);
  double entropy_term = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) entropy_term += p.at(i) * log_p.at(i);
  Tensor log_q = num::log_softmax_rows(student_logits, tau);
  Tensor cross = num::sum(num::mul(p, log_q));
  Tensor out = num::add_scalar(num::scale(cross, -1.0), entropy_term);
  if (tau_squared) out = num::scale(out, tau * tau);
  return out;
}

Tensor vkd(const Tensor& ce, const Tensor& kld_term, double alpha) {
  return num::add(num::scale(ce, alpha), num::scale(kld_term, 1.0 - alpha));
}

Tensor fsd_intra(const Tensor& teacher_hidden, const Tensor& student_hidden) {
  sim::PerSampleCka per = sim::cka_per_sample(teacher_hidden.detach(), student_hidden);
  std::vector<Tensor> logs;
  for (std::size_t i = 0; i < per.values.size(); ++i) {
    if (!per.degenerate[i]) logs.push_back(neg_log_cka(per.values[i]));
  }
  if (logs.empty()) throw DegenerateBatch("fsd_intra: every sample has degenerate token features");
  return num::mean(num::stack(logs));
}

Tensor fsd_local(const Tensor& teacher_hidden, const Tensor& student_hidden) {
  return neg_log_cka(sim::cka(flatten_rows(student_hidden), flatten_rows(teacher_hidden.detach())));
}

Tensor memory_structure_loss(const Tensor& teacher_memory, const Tensor& student_memory) {
  return neg_log_cka(sim::cka(teacher_memory.detach(), student_memory));
}

Tensor memory_hidden_loss(const Tensor& teacher_hidden, const Tensor& student_hidden,
                          const Tensor& teacher_memory, const Tensor& student_memory, Psi psi) {
  Tensor ht = flatten_rows(teacher_hidden.detach());
  Tensor hs = flatten_rows(student_hidden);
  if (ht.shape() != hs.shape()) throw ShapeError("memory_hidden_loss: hidden shapes differ");
  if (teacher_memory.shape() != student_memory.shape()) {
    throw ShapeError("memory_hidden_loss: memory shapes differ");
  }
  if (teacher_memory.rank() != 2 || teacher_memory.dim(1) != ht.dim(1)) {
    throw ShapeError("memory_hidden_loss: memory width differs from hidden width");
  }
  Tensor rt = relation(ht, teacher_memory.detach(), psi);
  Tensor rs = relation(hs, student_memory, psi);
  return num::mean(num::square(num::sub(rt, rs)));
}

GlobalTerms fsd_global_terms(const Tensor& teacher_hidden, const Tensor& student_hidden,
                             const Tensor& teacher_memory, const Tensor& student_memory,
                             double gamma_m) {
  if (gamma_m < 0.0 || gamma_m > 1.0) throw UsageError("fsd_global: gamma_m must lie in [0, 1]");
  GlobalTerms t;
  t.hidden_euclidean = memory_hidden_loss(teacher_hidden, student_hidden, teacher_memory,
                                          student_memory, Psi::kEuclidean);
  t.hidden_cosine = memory_hidden_loss(teacher_hidden, student_hidden, teacher_memory,
                                       student_memory, Psi::kCosine);
  t.structure = memory_structure_loss(teacher_memory, student_memory);
  t.total = num::add(num::add(num::scale(t.hidden_euclidean, gamma_m),
                              num::scale(t.hidden_cosine, 1.0 - gamma_m)),
                     t.structure);
  return t;
}

Tensor fsd_global(const Tensor& teacher_hidden, const Tensor& student_hidden,
                  const Tensor& teacher_memory, const Tensor& student_memory, double gamma_m) {
  return fsd_global_terms(teacher_hidden, student_hidden, teacher_memory, student_memory, gamma_m)
      .total;
}

Tensor fsd_integrated(const Tensor& li, const Tensor& ll, const Tensor& lg, double gamma_i,
                      double gamma_l, double gamma_g) {
  if (gamma_i < 0.0 || gamma_l < 0.0 || gamma_g < 0.0) {
    throw UsageError("fsd_integrated: weights must be nonnegative");
  }
  Tensor acc = Tensor::scalar(0.0);
  const std::pair<const Tensor*, double> terms[] = {{&li, gamma_i}, {&ll, gamma_l}, {&lg, gamma_g}};
  for (const auto& [term, weight] : terms) {
    if (!term->defined()) {
      if (weight != 0.0) throw UsageError("fsd_integrated: missing term with nonzero weight");
      continue;
    }
    acc = num::add(acc, num::scale(*term, weight));
  }
  return acc;
}

Tensor total_loss(const Tensor& vkd_term, const Tensor& structure, double beta) {
  if (beta < 0.0) throw UsageError("total_loss: beta must be nonnegative");
  return num::add(vkd_term, num::scale(structure, beta));
}

}  // namespace fsd::loss
