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

#include "fsd/model.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "fsd/errors.hpp"
#include "fsd/numerics/ops.hpp"

namespace fsd::model {

namespace {

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  return num::add_row_broadcast(num::matmul(x, w), b);
}

Tensor dropout(const Tensor& x, double rate, Rng* rng) {
  if (rng == nullptr || rate <= 0.0) return x;
  const double keep = 1.0 / (1.0 - rate);
  std::vector<double> factors(x.size());
  for (auto& f : factors) f = rng->bernoulli(rate) ? 0.0 : keep;
  return num::mul_const(x, std::move(factors));
}

template <typename P, typename T>
std::vector<std::pair<std::string, T*>> list_params(P& p) {
  std::vector<std::pair<std::string, T*>> out = {
      {"embedding.token", &p.token_embedding},
      {"embedding.position", &p.position_embedding},
  };
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& l = p.layers[i];
    const std::string pre = "layer." + std::to_string(i) + ".";
    for (auto [name, t] : std::initializer_list<std::pair<const char*, T*>>{
             {"ln1.gain", &l.ln1_gain}, {"ln1.bias", &l.ln1_bias}, {"attn.wq", &l.wq},
             {"attn.bq", &l.bq},         {"attn.wk", &l.wk},       {"attn.bk", &l.bk},
             {"attn.wv", &l.wv},         {"attn.bv", &l.bv},       {"attn.wo", &l.wo},
             {"attn.bo", &l.bo},         {"ln2.gain", &l.ln2_gain}, {"ln2.bias", &l.ln2_bias},
             {"ffn.w1", &l.w1},          {"ffn.b1", &l.b1},         {"ffn.w2", &l.w2},
             {"ffn.b2", &l.b2}}) {
      out.emplace_back(pre + name, t);
    }
  }
  out.emplace_back("final.gain", &p.final_gain);
  out.emplace_back("final.bias", &p.final_bias);
  out.emplace_back("classifier.w", &p.classifier_w);
  out.emplace_back("classifier.b", &p.classifier_b);
  return out;
}

enum class Init { kNormal, kZero, kOne };

Init init_kind(const std::string& name) {
  if (name.ends_with("gain")) return Init::kOne;
  const auto dot = name.rfind('.');
  const std::string leaf = name.substr(dot + 1);
  if (leaf.front() == 'b') return Init::kZero;
  return Init::kNormal;
}

}  // namespace

std::string_view to_string(Pooling p) { return p == Pooling::kMean ? "mean" : "first"; }

Pooling parse_pooling(std::string_view text) {
  if (text == "mean") return Pooling::kMean;
  if (text == "first") return Pooling::kFirstToken;
  throw UsageError("unknown pooling '" + std::string(text) + "' (expected mean or first)");
}

void EncoderConfig::validate() const {
  if (n_layers == 0) throw UsageError("encoder: n_layers must be positive");
  if (n_heads == 0 || d_model == 0 || d_model % n_heads != 0) {
    throw UsageError("encoder: d_model must be a positive multiple of n_heads");
  }
  if (d_ff == 0) throw UsageError("encoder: d_ff must be positive");
  if (vocab_size < 3) throw UsageError("encoder: vocab_size must be at least 3");
  if (max_seq_len == 0) throw UsageError("encoder: max_seq_len must be positive");
  if (n_classes < 2) throw UsageError("encoder: n_classes must be at least 2");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw UsageError("encoder: dropout_rate must lie in [0, 1)");
  }
}

std::vector<std::pair<std::string, Tensor*>> EncoderParams::named() {
  return list_params<EncoderParams, Tensor>(*this);
}

std::vector<std::pair<std::string, const Tensor*>> EncoderParams::named() const {
  return list_params<const EncoderParams, const Tensor>(*this);
}

EncoderParams EncoderParams::clone(bool requires_grad) const {
  EncoderParams out;
  out.layers.resize(layers.size());
  auto dst = out.named();
  auto src = named();
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i].second = src[i].second->clone(requires_grad);
  return out;
}

std::size_t EncoderParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named()) n += t->size();
  return n;
}

void Batch::validate(const EncoderConfig& config) const {
  if (size == 0) throw ShapeError("batch: empty batch");
  if (seq != config.max_seq_len) {
    throw ShapeError("batch: sequence length " + std::to_string(seq) + " differs from max_seq_len " +
                     std::to_string(config.max_seq_len));
  }
  if (ids.size() != size * seq || mask.size() != size * seq) {
    throw ShapeError("batch: ids/mask size differs from size * seq");
  }
  if (!labels.empty() && labels.size() != size) throw ShapeError("batch: label count differs from size");
  for (std::int32_t id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= config.vocab_size) {
      throw ShapeError("batch: token id " + std::to_string(id) + " outside vocabulary");
    }
  }
  for (std::int32_t y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= config.n_classes) {
      throw ShapeError("batch: label " + std::to_string(y) + " outside class set");
    }
  }
  for (std::size_t b = 0; b < size; ++b) {
    if (std::none_of(mask.begin() + b * seq, mask.begin() + (b + 1) * seq,
                     [](std::uint8_t m) { return m != 0; })) {
      throw ShapeError("batch: sample " + std::to_string(b) + " has no unmasked token");
    }
  }
}

ForwardOutput forward(const EncoderParams& params, const EncoderConfig& config, const Batch& batch,
                      const ForwardOptions& options) {
  batch.validate(config);
  if (params.layers.size() != config.n_layers) {
    throw ShapeError("forward: parameter set has " + std::to_string(params.layers.size()) +
                     " layers, config expects " + std::to_string(config.n_layers));
  }
  const std::size_t b = batch.size, w = batch.seq, d = config.d_model;
  const double p = config.dropout_rate;
  Rng* rng = options.dropout_rng;

  std::vector<std::int32_t> positions(b * w);
  for (std::size_t i = 0; i < b * w; ++i) positions[i] = static_cast<std::int32_t>(i % w);
  Tensor x = num::add(num::gather_rows(params.token_embedding, batch.ids),
                      num::gather_rows(params.position_embedding, positions));
  x = dropout(x, p, rng);

  for (const LayerParams& l : params.layers) {
    Tensor h = num::layer_norm_rows(x, l.ln1_gain, l.ln1_bias, kLayerNormEps);
    Tensor att = num::multihead_attention(linear(h, l.wq, l.bq), linear(h, l.wk, l.bk),
                                          linear(h, l.wv, l.bv), batch.mask, b, w, config.n_heads);
    x = num::add(x, dropout(linear(att, l.wo, l.bo), p, rng));
    Tensor h2 = num::layer_norm_rows(x, l.ln2_gain, l.ln2_bias, kLayerNormEps);
    Tensor ff = linear(num::gelu(linear(h2, l.w1, l.b1)), l.w2, l.b2);
    x = num::add(x, dropout(ff, p, rng));
  }
  x = num::layer_norm_rows(x, params.final_gain, params.final_bias, kLayerNormEps);
  Tensor hidden = num::zero_masked_rows(x, batch.mask);
  Tensor pooled = config.pooling == Pooling::kMean ? num::masked_mean_pool(hidden, batch.mask, b, w)
                                                   : num::first_token_pool(hidden, b, w);
  ForwardOutput out;
  out.logits = linear(pooled, params.classifier_w, params.classifier_b);
  out.hidden = num::reshape(hidden, {b, w, d});
  return out;
}

EncoderParams init_params(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  const std::size_t d = config.d_model, f = config.d_ff;
  EncoderParams p;
  p.layers.resize(config.n_layers);
  auto shape_of = [&](const std::string& name) -> num::Shape {
    if (name == "embedding.token") return {config.vocab_size, d};
    if (name == "embedding.position") return {config.max_seq_len, d};
    if (name == "classifier.w") return {d, config.n_classes};
    if (name == "classifier.b") return {config.n_classes};
    if (name.ends_with("ffn.w1")) return {d, f};
    if (name.ends_with("ffn.b1")) return {f};
    if (name.ends_with("ffn.w2")) return {f, d};
    if (name.ends_with(".wq") || name.ends_with(".wk") || name.ends_with(".wv") ||
        name.ends_with(".wo")) {
      return {d, d};
    }
    return {d};
  };
  Rng rng(derive_seed(seed, "init"));
  for (auto& [name, t] : p.named()) {
    const num::Shape shape = shape_of(name);
    std::vector<double> v(num::shape_size(shape), 0.0);
    switch (init_kind(name)) {
      case Init::kOne: std::fill(v.begin(), v.end(), 1.0); break;
      case Init::kZero: break;
      case Init::kNormal:
        for (auto& x : v) x = rng.normal(0.0, kInitStd);
        break;
    }
    *t = Tensor::from(shape, std::move(v), true);
  }
  return p;
}

EncoderParams init_student_from_teacher(const EncoderParams& teacher,
                                        const EncoderConfig& teacher_config,
                                        const EncoderConfig& student_config) {
  student_config.validate();
  const auto& t = teacher_config;
  const auto& s = student_config;
  if (s.n_layers > t.n_layers) {
    throw UsageError("student has more layers (" + std::to_string(s.n_layers) + ") than teacher (" +
                     std::to_string(t.n_layers) + ")");
  }
  if (s.d_model != t.d_model || s.n_heads != t.n_heads || s.d_ff != t.d_ff ||
      s.vocab_size != t.vocab_size || s.max_seq_len != t.max_seq_len ||
      s.n_classes != t.n_classes) {
    throw UsageError("student and teacher configs differ beyond n_layers");
  }
  if (teacher.layers.size() != t.n_layers) throw ShapeError("teacher params do not match config");
  EncoderParams out;
  out.token_embedding = teacher.token_embedding.clone(true);
  out.position_embedding = teacher.position_embedding.clone(true);
  for (std::size_t i = 0; i < s.n_layers; ++i) {
    const LayerParams& src = teacher.layers[i];
    LayerParams dst;
    dst.ln1_gain = src.ln1_gain.clone(true);
    dst.ln1_bias = src.ln1_bias.clone(true);
    dst.wq = src.wq.clone(true);
    dst.bq = src.bq.clone(true);
    dst.wk = src.wk.clone(true);
    dst.bk = src.bk.clone(true);
    dst.wv = src.wv.clone(true);
    dst.bv = src.bv.clone(true);
    dst.wo = src.wo.clone(true);
    dst.bo = src.bo.clone(true);
    dst.ln2_gain = src.ln2_gain.clone(true);
    dst.ln2_bias = src.ln2_bias.clone(true);
    dst.w1 = src.w1.clone(true);
    dst.b1 = src.b1.clone(true);
    dst.w2 = src.w2.clone(true);
    dst.b2 = src.b2.clone(true);
    out.layers.push_back(std::move(dst));
  }
  out.final_gain = teacher.final_gain.clone(true);
  out.final_bias = teacher.final_bias.clone(true);
  out.classifier_w = teacher.classifier_w.clone(true);
  out.classifier_b = teacher.classifier_b.clone(true);
  return out;
}

}  // namespace fsd::model
