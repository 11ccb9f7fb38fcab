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

#include <gtest/gtest.h>

#include <cmath>

#include "fsd/errors.hpp"
#include "fsd/model.hpp"
#include "fsd/numerics/finite_diff.hpp"
#include "fsd/numerics/ops.hpp"
#include "test_util.hpp"

namespace fsd::model {
namespace {

using num::Tensor;

EncoderConfig small_config(std::size_t layers = 2) {
  EncoderConfig c;
  c.n_layers = layers;
  c.n_heads = 2;
  c.d_model = 8;
  c.d_ff = 12;
  c.vocab_size = 10;
  c.max_seq_len = 5;
  c.n_classes = 3;
  return c;
}

Batch make_batch(const EncoderConfig& c, std::size_t size, std::uint64_t seed) {
  Rng rng(seed);
  Batch b;
  b.size = size;
  b.seq = c.max_seq_len;
  for (std::size_t i = 0; i < size; ++i) {
    const std::size_t len = 1 + rng.below(c.max_seq_len);
    for (std::size_t t = 0; t < c.max_seq_len; ++t) {
      const bool real = t < len;
      b.ids.push_back(real ? static_cast<std::int32_t>(3 + rng.below(c.vocab_size - 3)) : 0);
      b.mask.push_back(real ? 1 : 0);
    }
    b.labels.push_back(static_cast<std::int32_t>(rng.below(c.n_classes)));
  }
  return b;
}

// Large-scale random weights so the reference comparison exercises every term.
EncoderParams perturbed_params(const EncoderConfig& c, std::uint64_t seed) {
  EncoderParams p = init_params(c, seed);
  Rng rng(seed + 1);
  for (auto& [name, t] : p.named()) {
    for (double& v : t->mutable_data()) v += rng.normal(0.0, 0.5);
  }
  return p;
}

TEST(Forward, OutputShapes) {
  EncoderConfig c = small_config();
  EncoderParams p = init_params(c, 1);
  Batch b = make_batch(c, 4, 2);
  ForwardOutput out = forward(p, c, b);
  EXPECT_EQ(out.logits.shape(), (num::Shape{4, 3}));
  EXPECT_EQ(out.hidden.shape(), (num::Shape{4, 5, 8}));
}

TEST(Forward, PadTokensDoNotChangeOutputs) {
  EncoderConfig c = small_config();
  EncoderParams p = perturbed_params(c, 3);
  Batch b = make_batch(c, 6, 4);
  ForwardOutput o1 = forward(p, c, b);
  Batch b2 = b;
  for (std::size_t i = 0; i < b2.ids.size(); ++i) {
    if (!b2.mask[i]) b2.ids[i] = static_cast<std::int32_t>(1 + i % 9);
  }
  ForwardOutput o2 = forward(p, c, b2);
  EXPECT_EQ(o1.logits.to_vector(), o2.logits.to_vector());
  EXPECT_EQ(o1.hidden.to_vector(), o2.hidden.to_vector());
  for (std::size_t i = 0; i < b.mask.size(); ++i) {
    if (b.mask[i]) continue;
    for (std::size_t k = 0; k < c.d_model; ++k) EXPECT_EQ(o1.hidden.at(i * c.d_model + k), 0.0);
  }
}

TEST(Forward, DeterministicWithoutDropout) {
  EncoderConfig c = small_config();
  EncoderParams p = init_params(c, 5);
  Batch b = make_batch(c, 3, 6);
  EXPECT_EQ(forward(p, c, b).logits.to_vector(), forward(p, c, b).logits.to_vector());
}

TEST(Forward, DropoutOnlyWithGenerator) {
  EncoderConfig c = small_config();
  c.dropout_rate = 0.3;
  EncoderParams p = perturbed_params(c, 7);
  Batch b = make_batch(c, 3, 8);
  Rng r1(1), r2(1);
  auto a = forward(p, c, b, {&r1}).logits.to_vector();
  EXPECT_EQ(a, forward(p, c, b, {&r2}).logits.to_vector());
  EXPECT_NE(a, forward(p, c, b).logits.to_vector());
}

// Straight-line reference for 1 layer, 1 head, mean pooling.
std::vector<double> reference_logits(const EncoderParams& p, const EncoderConfig& c, const Batch& b) {
  const std::size_t w = b.seq, d = c.d_model, f = c.d_ff;
  auto val = [](const Tensor& t, std::size_t i, std::size_t j, std::size_t cols) {
    return t.at(i * cols + j);
  };
  auto ln = [&](std::vector<double> x, const Tensor& g, const Tensor& be) {
    double mu = 0, var = 0;
    for (double v : x) mu += v;
    mu /= d;
    for (double v : x) var += (v - mu) * (v - mu);
    var /= d;
    for (std::size_t k = 0; k < d; ++k) x[k] = (x[k] - mu) / std::sqrt(var + 1e-5) * g.at(k) + be.at(k);
    return x;
  };
  auto lin = [&](const std::vector<double>& x, const Tensor& wt, const Tensor& bias, std::size_t out) {
    std::vector<double> y(out);
    for (std::size_t o = 0; o < out; ++o) {
      y[o] = bias.at(o);
      for (std::size_t i = 0; i < x.size(); ++i) y[o] += x[i] * val(wt, i, o, out);
    }
    return y;
  };
  const LayerParams& L = p.layers[0];
  std::vector<double> logits;
  for (std::size_t s = 0; s < b.size; ++s) {
    std::vector<std::vector<double>> x(w, std::vector<double>(d));
    for (std::size_t t = 0; t < w; ++t)
      for (std::size_t k = 0; k < d; ++k)
        x[t][k] = val(p.token_embedding, b.ids[s * w + t], k, d) + val(p.position_embedding, t, k, d);
    std::vector<std::vector<double>> q(w), kk(w), v(w);
    for (std::size_t t = 0; t < w; ++t) {
      auto h = ln(x[t], L.ln1_gain, L.ln1_bias);
      q[t] = lin(h, L.wq, L.bq, d);
      kk[t] = lin(h, L.wk, L.bk, d);
      v[t] = lin(h, L.wv, L.bv, d);
    }
    std::vector<std::vector<double>> y(w);
    for (std::size_t t = 0; t < w; ++t) {
      std::vector<double> sc(w, 0.0);
      double mx = -1e300, z = 0;
      for (std::size_t j = 0; j < w; ++j) {
        if (!b.mask[s * w + j]) continue;
        for (std::size_t k = 0; k < d; ++k) sc[j] += q[t][k] * kk[j][k];
        sc[j] /= std::sqrt(static_cast<double>(d));
        mx = std::max(mx, sc[j]);
      }
      std::vector<double> att(d, 0.0);
      for (std::size_t j = 0; j < w; ++j)
        if (b.mask[s * w + j]) z += std::exp(sc[j] - mx);
      for (std::size_t j = 0; j < w; ++j) {
        if (!b.mask[s * w + j]) continue;
        const double pj = std::exp(sc[j] - mx) / z;
        for (std::size_t k = 0; k < d; ++k) att[k] += pj * v[j][k];
      }
      auto o = lin(att, L.wo, L.bo, d);
      for (std::size_t k = 0; k < d; ++k) x[t][k] += o[k];
      auto h2 = ln(x[t], L.ln2_gain, L.ln2_bias);
      auto u = lin(h2, L.w1, L.b1, f);
      for (double& e : u) e = 0.5 * e * (1.0 + std::erf(e / std::sqrt(2.0)));
      auto ff = lin(u, L.w2, L.b2, d);
      for (std::size_t k = 0; k < d; ++k) x[t][k] += ff[k];
      y[t] = ln(x[t], p.final_gain, p.final_bias);
    }
    std::vector<double> pooled(d, 0.0);
    double count = 0;
    for (std::size_t t = 0; t < w; ++t) {
      if (!b.mask[s * w + t]) continue;
      count += 1;
      for (std::size_t k = 0; k < d; ++k) pooled[k] += y[t][k];
    }
    for (double& e : pooled) e /= count;
    for (double e : lin(pooled, p.classifier_w, p.classifier_b, c.n_classes)) logits.push_back(e);
  }
  return logits;
}

TEST(Forward, MatchesStraightLineReference) {
  EncoderConfig c = small_config(1);
  c.n_heads = 1;
  c.d_model = 4;
  c.d_ff = 6;
  EncoderParams p = perturbed_params(c, 9);
  Batch b = make_batch(c, 4, 10);
  auto got = forward(p, c, b).logits.to_vector();
  auto ref = reference_logits(p, c, b);
  ASSERT_EQ(got.size(), ref.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], ref[i], 1e-10);
}

TEST(Init, DeterministicGainsAndScale) {
  EncoderConfig c = small_config();
  EncoderParams a = init_params(c, 11), b = init_params(c, 11);
  auto na = a.named();
  auto nb = b.named();
  for (std::size_t i = 0; i < na.size(); ++i) {
    EXPECT_EQ(na[i].second->to_vector(), nb[i].second->to_vector()) << na[i].first;
    if (na[i].first.ends_with("gain")) {
      for (double v : na[i].second->data()) EXPECT_EQ(v, 1.0);
    }
    if (na[i].first.ends_with("bias")) {
      for (double v : na[i].second->data()) EXPECT_EQ(v, 0.0);
    }
  }
  EncoderConfig big = c;
  big.vocab_size = 2500;
  EncoderParams p = init_params(big, 12);
  const auto& e = p.token_embedding;
  ASSERT_GE(e.size(), 10000u);
  double s = 0, ss = 0;
  for (double v : e.data()) {
    s += v;
    ss += v * v;
  }
  const double n = static_cast<double>(e.size());
  EXPECT_NEAR(std::sqrt(ss / n - (s / n) * (s / n)), 0.02, 0.2 * 0.02);
}

TEST(StudentInit, FullCopyGivesIdenticalLogits) {
  EncoderConfig c = small_config(3);
  EncoderParams t = perturbed_params(c, 13);
  EncoderParams s = init_student_from_teacher(t, c, c);
  Batch b = make_batch(c, 4, 14);
  EXPECT_EQ(forward(t, c, b).logits.to_vector(), forward(s, c, b).logits.to_vector());
}

TEST(StudentInit, TruncatedCopyMatchesHandAssembledModel) {
  EncoderConfig tc = small_config(4);
  EncoderConfig sc = small_config(2);
  EncoderParams t = perturbed_params(tc, 15);
  EncoderParams s = init_student_from_teacher(t, tc, sc);
  ASSERT_EQ(s.layers.size(), 2u);
  EXPECT_EQ(s.layers[1].w1.to_vector(), t.layers[1].w1.to_vector());
  EncoderParams hand = t.clone(false);
  hand.layers.resize(2);
  Batch b = make_batch(sc, 5, 16);
  ForwardOutput a = forward(s, sc, b), h = forward(hand, sc, b);
  EXPECT_EQ(a.logits.to_vector(), h.logits.to_vector());
  EXPECT_EQ(a.hidden.to_vector(), h.hidden.to_vector());
}

TEST(StudentInit, RejectsIncompatibleConfigs) {
  EncoderConfig tc = small_config(2), sc = small_config(3);
  EncoderParams t = init_params(tc, 1);
  EXPECT_THROW(init_student_from_teacher(t, tc, sc), UsageError);
  sc = small_config(1);
  sc.d_model = 4;
  EXPECT_THROW(init_student_from_teacher(t, tc, sc), UsageError);
}

TEST(Config, Validation) {
  EncoderConfig c = small_config();
  c.n_heads = 3;
  EXPECT_THROW(c.validate(), UsageError);
  c = small_config();
  c.n_classes = 1;
  EXPECT_THROW(c.validate(), UsageError);
  Batch b = make_batch(small_config(), 2, 1);
  b.ids[0] = 99;
  EXPECT_THROW(b.validate(small_config()), ShapeError);
}

// Cross-entropy gradient against central differences for every parameter group.
TEST(Gradients, CrossEntropyMatchesFiniteDifferencesPerGroup) {
  EncoderConfig c = small_config(2);
  c.d_model = 4;
  c.d_ff = 6;
  c.vocab_size = 6;
  c.max_seq_len = 3;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EncoderParams p = perturbed_params(c, 100 + seed);
    Batch b = make_batch(c, 3, 200 + seed);
    num::backward(num::cross_entropy(forward(p, c, b).logits, b.labels));
    auto named = p.named();
    for (auto& [name, t] : named) {
      Tensor saved = t->clone(true);
      auto analytic = t->grad();
      std::vector<double> a(analytic.begin(), analytic.end());
      Tensor fd = num::finite_diff_grad(
          [&](const Tensor& x) {
            *t = x;
            num::NoGradGuard g;
            return num::cross_entropy(forward(p, c, b).logits, b.labels).item();
          },
          saved);
      *t = saved;
      EXPECT_LT(num::relative_error(a, fd.to_vector(), 1e-7), 1e-3) << name << " seed " << seed;
    }
  }
}

}  // namespace
}  // namespace fsd::model
