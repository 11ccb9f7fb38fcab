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

#include "fsd/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fsd/errors.hpp"
#include "fsd/numerics/ops.hpp"
#include "fsd/rng.hpp"
#include "fsd/similarity.hpp"

namespace fsd::analysis {

namespace {

double psi_value(const double* a, const double* b, std::size_t f, loss::Psi psi) {
  if (psi == loss::Psi::kEuclidean) {
    double s = 0.0;
    for (std::size_t k = 0; k < f; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(s);
  }
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t k = 0; k < f; ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  return ab / (std::max(std::sqrt(aa), loss::kCosineEps) * std::max(std::sqrt(bb), loss::kCosineEps));
}

// sum_ij |psi(t_i, t_j) - psi(s_i, s_j)| over n rows of width f.
double relation_gap(const double* t, const double* s, std::size_t n, std::size_t f, loss::Psi psi) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      acc += std::abs(psi_value(t + i * f, t + j * f, f, psi) - psi_value(s + i * f, s + j * f, f, psi));
    }
  }
  return acc;
}

Tensor flat(const Tensor& h) { return Tensor::from({h.dim(0), h.size() / h.dim(0)}, h.to_vector()); }

}  // namespace

double relation_difference_inter(const Tensor& teacher, const Tensor& student, loss::Psi psi) {
  if (teacher.shape() != student.shape() || teacher.rank() < 2) {
    throw ShapeError("relation_difference_inter: teacher and student shapes differ");
  }
  const std::size_t b = teacher.dim(0), f = teacher.size() / b;
  const double gap = relation_gap(teacher.data().data(), student.data().data(), b, f, psi);
  return gap / static_cast<double>(b * b);
}

double relation_difference_intra(const Tensor& teacher, const Tensor& student, loss::Psi psi) {
  if (teacher.shape() != student.shape() || teacher.rank() != 3) {
    throw ShapeError("relation_difference_intra: expects two [B x W x D] tensors of equal shape");
  }
  const std::size_t b = teacher.dim(0), w = teacher.dim(1), d = teacher.dim(2);
  const double* t = teacher.data().data();
  const double* s = student.data().data();
  double acc = 0.0;
  for (std::size_t i = 0; i < b; ++i) acc += relation_gap(t + i * w * d, s + i * w * d, w, d, psi);
  return acc / static_cast<double>(w * w * b);
}

RdSample relation_differences(const Tensor& teacher, const Tensor& student) {
  RdSample r;
  r.e_intra = relation_difference_intra(teacher, student, loss::Psi::kEuclidean);
  r.e_inter = relation_difference_inter(teacher, student, loss::Psi::kEuclidean);
  r.c_intra = relation_difference_intra(teacher, student, loss::Psi::kCosine);
  r.c_inter = relation_difference_inter(teacher, student, loss::Psi::kCosine);
  return r;
}

RdSample evaluate_rd(const model::EncoderParams& teacher, const model::EncoderConfig& teacher_config,
                     const model::EncoderParams& student, const model::EncoderConfig& student_config,
                     std::span<const model::Batch> batches) {
  if (batches.empty()) throw UsageError("evaluate_rd: no evaluation batches");
  num::NoGradGuard guard;
  RdSample acc;
  for (const auto& b : batches) {
    RdSample r = relation_differences(model::forward(teacher, teacher_config, b).hidden,
                                      model::forward(student, student_config, b).hidden);
    acc.e_intra += r.e_intra;
    acc.e_inter += r.e_inter;
    acc.c_intra += r.c_intra;
    acc.c_inter += r.c_inter;
  }
  const double n = static_cast<double>(batches.size());
  acc.e_intra /= n;
  acc.e_inter /= n;
  acc.c_intra /= n;
  acc.c_inter /= n;
  return acc;
}

std::vector<RdSample> rd_curve(const model::EncoderParams& teacher, const model::EncoderConfig& teacher_config,
                               std::span<const Checkpointed> students,
                               const model::EncoderConfig& student_config,
                               std::span<const model::Batch> batches) {
  std::vector<RdSample> out;
  for (const auto& c : students) {
    RdSample r = evaluate_rd(teacher, teacher_config, c.params, student_config, batches);
    r.step = c.step;
    out.push_back(r);
  }
  return out;
}

RestorationReport restoration_rate(std::span<const std::int32_t> teacher_preds,
                                   std::span<const std::int32_t> student_preds, std::size_t n_classes) {
  if (teacher_preds.size() != student_preds.size()) {
    throw ShapeError("restoration_rate: prediction vectors differ in length");
  }
  if (n_classes < 2) throw UsageError("restoration_rate: need at least 2 classes");
  std::vector<std::size_t> tp(n_classes, 0), pred(n_classes, 0), truth(n_classes, 0);
  for (std::size_t i = 0; i < teacher_preds.size(); ++i) {
    const auto t = teacher_preds[i], s = student_preds[i];
    if (t < 0 || s < 0 || static_cast<std::size_t>(t) >= n_classes ||
        static_cast<std::size_t>(s) >= n_classes) {
      throw ShapeError("restoration_rate: class id out of range");
    }
    ++truth[t];
    ++pred[s];
    if (t == s) ++tp[t];
  }
  RestorationReport r;
  for (std::size_t c = 0; c < n_classes; ++c) {
    ClassScores cs;
    cs.support = truth[c];
    cs.precision_undefined = pred[c] == 0;
    cs.recall_undefined = truth[c] == 0;
    cs.precision = cs.precision_undefined ? 0.0 : static_cast<double>(tp[c]) / static_cast<double>(pred[c]);
    cs.recall = cs.recall_undefined ? 0.0 : static_cast<double>(tp[c]) / static_cast<double>(truth[c]);
    const double denom = cs.precision + cs.recall;
    cs.f1_undefined = denom == 0.0;
    cs.f1 = cs.f1_undefined ? 0.0 : 2.0 * cs.precision * cs.recall / denom;
    r.any_undefined = r.any_undefined || cs.precision_undefined || cs.recall_undefined || cs.f1_undefined;
    r.macro_precision += cs.precision;
    r.macro_recall += cs.recall;
    r.macro_f1 += cs.f1;
    r.classes.push_back(cs);
  }
  const double k = static_cast<double>(n_classes);
  r.macro_precision /= k;
  r.macro_recall /= k;
  r.macro_f1 /= k;
  return r;
}

std::vector<model::Batch> heatmap_pool(const data::Dataset& ds, std::size_t pool_size,
                                       std::size_t batch_size, std::uint64_t seed) {
  if (pool_size < 2 || batch_size < 2) throw UsageError("heatmap: pool and batch sizes must be >= 2");
  if (pool_size * batch_size > ds.size()) {
    throw UsageError("heatmap: pool of " + std::to_string(pool_size) + " x " + std::to_string(batch_size) +
                     " exceeds the " + std::to_string(ds.size()) + " available examples");
  }
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "pool"));
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<model::Batch> pool;
  for (std::size_t p = 0; p < pool_size; ++p) {
    pool.push_back(ds.batch({order.data() + p * batch_size, batch_size}));
  }
  return pool;
}

std::vector<Tensor> pool_features(const model::EncoderParams& params, const model::EncoderConfig& config,
                                  std::span<const model::Batch> pool) {
  num::NoGradGuard guard;
  std::vector<Tensor> out;
  for (const auto& b : pool) out.push_back(flat(model::forward(params, config, b).hidden));
  return out;
}

HeatmapMatrix cka_heatmap(std::span<const Tensor> teacher_features, std::span<const Tensor> other_features) {
  const std::size_t p = teacher_features.size();
  if (p < 2 || other_features.size() != p) throw UsageError("heatmap: need two pools of equal size >= 2");
  num::NoGradGuard guard;
  HeatmapMatrix h;
  h.size = p;
  h.values.assign(p * p, 0.0);
  h.missing.assign(p * p, false);
  double diag = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      try {
        h.values[i * p + j] = sim::cka_value(teacher_features[i], other_features[j]);
      } catch (const DegenerateFeatures&) {
        h.missing[i * p + j] = true;
        ++h.missing_count;
        continue;
      }
      if (i == j) {
        diag += h.values[i * p + j];
        ++h.diagonal_count;
      }
    }
  }
  h.diagonal_average = h.diagonal_count ? diag / static_cast<double>(h.diagonal_count) : 0.0;
  return h;
}

HeatmapMatrix cka_heatmap(const model::EncoderParams& teacher, const model::EncoderConfig& teacher_config,
                          const model::EncoderParams& other, const model::EncoderConfig& other_config,
                          std::span<const model::Batch> pool) {
  auto t = pool_features(teacher, teacher_config, pool);
  auto o = pool_features(other, other_config, pool);
  return cka_heatmap(t, o);
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

std::map<std::string, double> rank_table(const std::map<std::string, std::array<double, 4>>& final_rd) {
  if (final_rd.size() < 2) throw UsageError("rank_table: need at least 2 methods");
  std::vector<std::string> names;
  for (const auto& [name, v] : final_rd) {
    for (double x : v) {
      if (!std::isfinite(x)) throw UsageError("rank_table: method " + name + " has a missing RD variant");
    }
    names.push_back(name);
  }
  std::map<std::string, double> out;
  for (const auto& n : names) out[n] = 0.0;
  for (std::size_t variant = 0; variant < 4; ++variant) {
    std::vector<double> col;
    for (const auto& n : names) col.push_back(final_rd.at(n)[variant]);
    auto r = average_ranks(col);
    for (std::size_t i = 0; i < names.size(); ++i) out[names[i]] += r[i] / 4.0;
  }
  return out;
}

std::map<std::string, double> mean_over_tasks(const std::map<std::string, std::vector<double>>& per_task) {
  std::map<std::string, double> out;
  for (const auto& [name, ranks] : per_task) {
    if (ranks.empty()) throw UsageError("mean_over_tasks: method " + name + " has no tasks");
    out[name] = std::accumulate(ranks.begin(), ranks.end(), 0.0) / static_cast<double>(ranks.size());
  }
  return out;
}

}  // namespace fsd::analysis
