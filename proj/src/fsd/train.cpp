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

#include "fsd/train.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "fsd/errors.hpp"
#include "fsd/numerics/ops.hpp"
#include "fsd/rng.hpp"

namespace fsd::train {

namespace {

// Batches of `size`, the last one kept only when it holds two or more rows.
std::vector<std::span<const std::size_t>> chunks(const std::vector<std::size_t>& order, std::size_t size) {
  std::vector<std::span<const std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += size) {
    const std::size_t n = std::min(size, order.size() - i);
    if (n < 2) break;
    out.emplace_back(order.data() + i, n);
  }
  return out;
}

std::vector<std::int32_t> argmax_rows(const Tensor& logits) {
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  std::vector<std::int32_t> out(n);
  auto v = logits.data();
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (v[i * k + j] > v[i * k + best]) best = j;
    }
    out[i] = static_cast<std::int32_t>(best);
  }
  return out;
}

// Rows of a cached [N x ...] tensor for the given indices.
Tensor gather_cached(const Tensor& t, std::span<const std::size_t> idx) {
  const std::size_t row = t.size() / t.dim(0);
  std::vector<double> out(idx.size() * row);
  auto src = t.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy(src.begin() + idx[i] * row, src.begin() + (idx[i] + 1) * row, out.begin() + i * row);
  }
  num::Shape shape = t.shape();
  shape[0] = idx.size();
  return Tensor::from(shape, std::move(out));
}

void check_finite(const Tensor& loss, std::size_t step) {
  if (!std::isfinite(loss.item())) {
    throw NonFiniteError("training diverged at step " + std::to_string(step));
  }
}

// Attaches the failing step to non-finite errors raised inside a forward pass.
[[noreturn]] void rethrow_at(const char* who, std::size_t step, const NonFiniteError& e) {
  const std::string what = e.what();
  if (what.rfind("training diverged", 0) == 0) throw NonFiniteError(std::string(who) + ": " + what);
  throw NonFiniteError(std::string(who) + ": training diverged at step " + std::to_string(step) + " (" + what + ")");
}

}  // namespace

void AdamSettings::validate() const {
  if (!(lr > 0.0)) throw UsageError("adam: lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw UsageError("adam: betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw UsageError("adam: eps must be positive");
  if (weight_decay < 0.0) throw UsageError("adam: weight_decay must be nonnegative");
}

Adam::Adam(std::vector<Tensor*> params, AdamSettings settings)
    : params_(std::move(params)), settings_(settings) {
  settings_.validate();
  for (Tensor* p : params_) {
    if (!p->is_leaf()) throw GraphError("adam: parameters must be leaves");
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const auto& s = settings_;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& p = *params_[k];
    auto x = p.mutable_data();
    std::span<const double> g;
    if (p.has_grad()) g = p.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double gi = g.empty() ? 0.0 : g[i];
      m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * gi;
      v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * gi * gi;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      x[i] -= s.lr * (mhat / (std::sqrt(vhat) + s.eps) + s.weight_decay * x[i]);
    }
  }
}

void Adam::zero_grad() {
  for (Tensor* p : params_) p->zero_grad();
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "shuffle", epoch));
  rng.shuffle(std::span<std::size_t>(order));
  return order;
}

double accuracy(std::span<const std::int32_t> predictions, std::span<const std::int32_t> labels) {
  if (predictions.size() != labels.size() || labels.empty()) {
    throw ShapeError("accuracy: prediction and label counts differ or are empty");
  }
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predictions[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

std::vector<std::int32_t> predict(const model::EncoderParams& params, const model::EncoderConfig& config,
                                  const data::Dataset& ds, std::size_t batch_size) {
  num::NoGradGuard guard;
  std::vector<std::int32_t> out;
  out.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); i += batch_size) {
    const std::size_t n = std::min(batch_size, ds.size() - i);
    auto p = argmax_rows(model::forward(params, config, ds.range(i, n)).logits);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

TeacherResult fine_tune_teacher(const model::EncoderConfig& config, const TeacherTrainConfig& settings,
                                const data::Dataset& train) {
  config.validate();
  if (settings.batch_size < 1) throw UsageError("teacher: batch_size must be positive");
  TeacherResult result;
  result.params = model::init_params(config, settings.seed);
  auto named = result.params.named();
  std::vector<Tensor*> slots;
  for (auto& [name, t] : named) slots.push_back(t);
  Adam adam(slots, settings.adam);
  std::size_t step = 0;
  try {
    for (std::size_t e = 0; e < settings.epochs; ++e) {
      Rng dropout_rng(derive_seed(settings.seed, "dropout", e));
      const auto order = epoch_order(train.size(), settings.seed, e);
      double loss_sum = 0.0;
      std::size_t batches = 0, hits = 0, seen = 0;
      for (std::size_t i = 0; i < order.size(); i += settings.batch_size) {
        const std::size_t n = std::min(settings.batch_size, order.size() - i);
        model::Batch b = train.batch({order.data() + i, n});
        adam.zero_grad();
        ++step;
        auto out = model::forward(result.params, config, b, {&dropout_rng});
        Tensor loss = num::cross_entropy(out.logits, b.labels);
        check_finite(loss, step);
        num::backward(loss);
        adam.step();
        loss_sum += loss.item();
        ++batches;
        auto pred = argmax_rows(out.logits);
        for (std::size_t k = 0; k < n; ++k) hits += pred[k] == b.labels[k];
        seen += n;
      }
      result.epochs.push_back({e, loss_sum / static_cast<double>(batches),
                               static_cast<double>(hits) / static_cast<double>(seen)});
    }
  } catch (const NonFiniteError& e) {
    rethrow_at("teacher", step, e);
  }
  for (auto& [name, t] : named) t->zero_grad();
  result.train_accuracy = accuracy(predict(result.params, config, train), train.labels);
  return result;
}

void DistillConfig::validate() const {
  weights.validate(kind);
  adam.validate();
  if (batch_size < 2) throw UsageError("distill: batch_size must be at least 2");
  if (loss::uses_global(kind) && memory_size < 2) throw UsageError("distill: memory_size must be at least 2");
}

TeacherCache cache_teacher_outputs(const model::EncoderParams& teacher,
                                   const model::EncoderConfig& config, const data::Dataset& ds,
                                   std::size_t batch_size) {
  num::NoGradGuard guard;
  std::vector<double> logits, hidden;
  for (std::size_t i = 0; i < ds.size(); i += batch_size) {
    const std::size_t n = std::min(batch_size, ds.size() - i);
    auto out = model::forward(teacher, config, ds.range(i, n));
    logits.insert(logits.end(), out.logits.data().begin(), out.logits.data().end());
    hidden.insert(hidden.end(), out.hidden.data().begin(), out.hidden.data().end());
  }
  TeacherCache c;
  c.logits = Tensor::from({ds.size(), config.n_classes}, std::move(logits));
  c.hidden = Tensor::from({ds.size(), ds.seq, config.d_model}, std::move(hidden));
  return c;
}

DistillResult distill(const model::EncoderParams& teacher, const model::EncoderConfig& teacher_config,
                      const mem::MemoryBank* teacher_memory, const model::EncoderParams& student_init,
                      const model::EncoderConfig& student_config, const DistillConfig& config,
                      const data::Dataset& train, const DistillHooks& hooks) {
  using loss::LossKind;
  config.validate();
  student_config.validate();
  const LossKind kind = config.kind;
  const auto& w = config.weights;
  const bool global = loss::uses_global(kind);
  if (global && teacher_memory == nullptr) {
    throw DependencyError("distill: loss kind " + std::string(loss::to_string(kind)) +
                          " needs a teacher memory (run post-train-memory first)");
  }
  const std::size_t width = train.seq * student_config.d_model;
  if (global && teacher_memory->width() != width) {
    throw ShapeError("distill: teacher memory width differs from W * D");
  }

  DistillResult result;
  result.student = student_init.clone(true);
  if (global) {
    result.student_memory = mem::init_student_memory(teacher_memory->size(), width, config.seed,
                                                     config.memory_init_std);
  }
  auto named = result.student.named();
  std::vector<Tensor*> slots;
  for (auto& [name, t] : named) slots.push_back(t);
  if (result.student_memory) slots.push_back(&result.student_memory->centroids);
  Adam adam(slots, config.adam);

  std::optional<TeacherCache> cache;
  if (loss::uses_teacher(kind)) cache = cache_teacher_outputs(teacher, teacher_config, train);

  std::size_t step = 0;
  try {
    for (std::size_t e = 0; e < config.epochs; ++e) {
      Rng dropout_rng(derive_seed(config.seed, "dropout", e));
      const auto order = epoch_order(train.size(), config.seed, e);
      for (auto idx : chunks(order, config.batch_size)) {
        model::Batch b = train.batch(idx);
        adam.zero_grad();
        ++step;
        auto out = model::forward(result.student, student_config, b, {&dropout_rng});
        MetricsRecord rec;
        rec.step = step;
        rec.epoch = e;
        Tensor ce = num::cross_entropy(out.logits, b.labels);
        rec.ce = ce.item();
        Tensor total = ce;
        if (kind != LossKind::kNoDS) {
          Tensor t_logits = gather_cached(cache->logits, idx);
          Tensor t_hidden = gather_cached(cache->hidden, idx);
          Tensor kl = loss::kld(t_logits, out.logits, w.tau, w.tau_squared);
          Tensor v = loss::vkd(ce, kl, w.alpha);
          rec.kld = kl.item();
          rec.vkd = v.item();
          total = v;
          if (kind != LossKind::kVKD) {
            Tensor li, ll, lg;
            if (loss::uses_intra(kind)) {
              li = loss::fsd_intra(t_hidden, out.hidden);
              rec.intra = li.item();
            }
            if (loss::uses_local(kind)) {
              ll = loss::fsd_local(t_hidden, out.hidden);
              rec.local = ll.item();
            }
            if (global) {
              auto g = loss::fsd_global_terms(t_hidden, out.hidden, teacher_memory->centroids,
                                              result.student_memory->centroids, w.gamma_m);
              lg = g.total;
              rec.global = lg.item();
              rec.global_euclidean = g.hidden_euclidean.item();
              rec.global_cosine = g.hidden_cosine.item();
              rec.memory_structure = g.structure.item();
            }
            Tensor structure;
            switch (kind) {
              case LossKind::kIntra: structure = li; break;
              case LossKind::kLocal: structure = ll; break;
              case LossKind::kGlobal: structure = lg; break;
              case LossKind::kIntraLocal:
                structure = loss::fsd_integrated(li, ll, Tensor{}, w.gamma_i, w.gamma_l, 0.0);
                break;
              default:
                structure = loss::fsd_integrated(li, ll, lg, w.gamma_i, w.gamma_l, w.gamma_g);
                break;
            }
            total = loss::total_loss(v, structure, w.beta);
          }
        }
        rec.total = total.item();
        check_finite(total, step);
        num::backward(total);
        adam.step();
        auto pred = argmax_rows(out.logits);
        rec.batch_accuracy = accuracy(pred, b.labels);
        if (hooks.on_step) hooks.on_step(rec, result.student);
        result.metrics.push_back(rec);
        if (config.checkpoint_interval > 0 && step % config.checkpoint_interval == 0 && hooks.on_checkpoint) {
          hooks.on_checkpoint(step, result.student,
                              result.student_memory ? &*result.student_memory : nullptr);
        }
      }
    }
  } catch (const NonFiniteError& e) {
    rethrow_at("student", step, e);
  }
  adam.zero_grad();
  return result;
}

}  // namespace fsd::train
