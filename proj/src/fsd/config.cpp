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
#include "fsd/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "fsd/errors.hpp"
#include "fsd/rng.hpp"

namespace fsd::cfg {

namespace {

Json weights_json(const loss::LossWeights& w) {
  return {{"alpha", w.alpha},     {"tau", w.tau},         {"beta", w.beta},
          {"gamma_m", w.gamma_m}, {"gamma_i", w.gamma_i}, {"gamma_l", w.gamma_l},
          {"gamma_g", w.gamma_g}, {"tau_squared", w.tau_squared}};
}

Json adam_json(const train::AdamSettings& a) {
  return {{"lr", a.lr}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"eps", a.eps}, {"weight_decay", a.weight_decay}};
}

Json defaults() {
  model::EncoderConfig student;
  student.n_layers = 2;
  train::TeacherTrainConfig tt;
  tt.seed = 7;
  train::DistillConfig dc;
  dc.kind = loss::LossKind::kIntraLocalGlobal;
  const data::GenSpec g;
  const AnalysisSettings an;
  Json j;
  j["name"] = "experiment";
  j["task"] = {{"source", "synthetic"}, {"name", "parity"},          {"size", g.size},
               {"vocab", g.vocab},      {"seq_len", g.seq_len},      {"marker_len", g.marker_len},
               {"seed", 1},             {"tsv_dir", ""},             {"n_classes", 2}};
  j["teacher"] = to_json(model::EncoderConfig{});
  j["student"] = to_json(student);
  j["teacher_training"] = {
      {"epochs", tt.epochs}, {"batch_size", tt.batch_size}, {"seed", tt.seed}, {"adam", adam_json(tt.adam)}};
  j["distill"] = {{"kind", "ILG"},
                  {"epochs", dc.epochs},
                  {"batch_size", dc.batch_size},
                  {"memory_size", dc.memory_size},
                  {"kmeans_epochs", dc.kmeans_epochs},
                  {"memory_init_std", dc.memory_init_std},
                  {"checkpoint_interval", dc.checkpoint_interval},
                  {"weights", weights_json(dc.weights)},
                  {"adam", adam_json(dc.adam)},
                  {"kind_weights", Json::object()}};
  j["kinds"] = {"noDS", "VKD", "I", "L", "G", "IL", "ILG"};
  j["batch_size_study"] = {{"kinds", {"G", "L"}}, {"sizes", {8, 16, 32}}};
  j["analysis"] = {{"pool_size", an.pool_size},   {"pool_batch_size", an.pool_batch_size},
                   {"pool_seed", an.pool_seed},   {"rd_batches", an.rd_batches},
                   {"rd_batch_size", an.rd_batch_size}};
  j["out_dir"] = "runs/experiment";
  j["seeds"] = {1, 2, 3, 4, 5};
  return j;
}

const char* type_name(const Json& j) {
  if (j.is_number()) return "a number";
  if (j.is_boolean()) return "a boolean";
  if (j.is_string()) return "a string";
  if (j.is_array()) return "an array";
  if (j.is_null()) return "null";
  return "an object";
}

bool same_kind(const Json& a, const Json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

// Overlays `user` onto `base`; every user key must exist in `base` with a
// value of the same JSON type. Free-form objects (kind_weights) are checked
// separately.
void merge_strict(Json& base, const Json& user, const std::string& where) {
  if (!user.is_object()) throw UsageError("config: " + (where.empty() ? "document" : where) + " must be an object");
  for (const auto& [key, value] : user.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!base.contains(key)) throw UsageError("config: unknown key '" + path + "'");
    Json& slot = base[key];
    if (!same_kind(slot, value)) {
      throw UsageError("config: '" + path + "' must be " + type_name(slot) + ", got " + type_name(value));
    }
    if (slot.is_object() && key != "kind_weights") {
      merge_strict(slot, value, path);
    } else {
      slot = value;
    }
  }
}

bool is_uint(const Json& v);

std::size_t uint_at(const Json& j, const char* key, const std::string& where) {
  const Json& v = j.at(key);
  if (!is_uint(v)) {
    throw UsageError("config: '" + where + "." + key + "' must be a nonnegative integer");
  }
  return v.get<std::size_t>();
}

bool is_uint(const Json& v) { return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0); }

double num_at(const Json& j, const char* key) { return j.at(key).get<double>(); }

loss::LossWeights weights_from(const Json& j, loss::LossWeights w) {
  static const std::set<std::string> known = {"alpha",   "tau",     "beta",    "gamma_m",
                                              "gamma_i", "gamma_l", "gamma_g", "tau_squared"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw UsageError("config: unknown loss weight '" + key + "'");
    if (key == "tau_squared") {
      if (!value.is_boolean()) throw UsageError("config: tau_squared must be a boolean");
      w.tau_squared = value.get<bool>();
      continue;
    }
    if (!value.is_number()) throw UsageError("config: loss weight '" + key + "' must be a number");
    const double x = value.get<double>();
    if (key == "alpha") w.alpha = x;
    else if (key == "tau") w.tau = x;
    else if (key == "beta") w.beta = x;
    else if (key == "gamma_m") w.gamma_m = x;
    else if (key == "gamma_i") w.gamma_i = x;
    else if (key == "gamma_l") w.gamma_l = x;
    else w.gamma_g = x;
  }
  return w;
}

train::AdamSettings adam_from(const Json& j) {
  train::AdamSettings a;
  a.lr = num_at(j, "lr");
  a.beta1 = num_at(j, "beta1");
  a.beta2 = num_at(j, "beta2");
  a.eps = num_at(j, "eps");
  a.weight_decay = num_at(j, "weight_decay");
  a.validate();
  return a;
}

std::vector<loss::LossKind> kinds_from(const Json& j) {
  std::vector<loss::LossKind> out;
  for (const auto& k : j) {
    if (!k.is_string()) throw UsageError("config: loss kinds must be strings");
    out.push_back(loss::parse_loss_kind(k.get<std::string>()));
  }
  return out;
}

}  // namespace

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Json to_json(const model::EncoderConfig& c) {
  return {{"n_layers", c.n_layers},       {"n_heads", c.n_heads},         {"d_model", c.d_model},
          {"d_ff", c.d_ff},               {"vocab_size", c.vocab_size},   {"max_seq_len", c.max_seq_len},
          {"n_classes", c.n_classes},     {"dropout_rate", c.dropout_rate},
          {"pooling", std::string(model::to_string(c.pooling))}};
}

model::EncoderConfig encoder_from_json(const Json& j) {
  Json base = to_json(model::EncoderConfig{});
  merge_strict(base, j, "encoder");
  model::EncoderConfig c;
  c.n_layers = uint_at(base, "n_layers", "encoder");
  c.n_heads = uint_at(base, "n_heads", "encoder");
  c.d_model = uint_at(base, "d_model", "encoder");
  c.d_ff = uint_at(base, "d_ff", "encoder");
  c.vocab_size = uint_at(base, "vocab_size", "encoder");
  c.max_seq_len = uint_at(base, "max_seq_len", "encoder");
  c.n_classes = uint_at(base, "n_classes", "encoder");
  c.dropout_rate = num_at(base, "dropout_rate");
  c.pooling = model::parse_pooling(base.at("pooling").get<std::string>());
  c.validate();
  return c;
}

ExperimentConfig parse(const Json& doc) {
  ExperimentConfig c;
  c.raw = defaults();
  merge_strict(c.raw, doc, "");
  const Json& r = c.raw;

  c.name = r.at("name").get<std::string>();
  const Json& t = r.at("task");
  const std::string source = t.at("source").get<std::string>();
  if (source != "synthetic" && source != "tsv") throw UsageError("config: task.source must be synthetic or tsv");
  c.task.synthetic = source == "synthetic";
  c.task.gen.task = data::parse_task(t.at("name").get<std::string>());
  c.task.gen.size = uint_at(t, "size", "task");
  c.task.gen.vocab = uint_at(t, "vocab", "task");
  c.task.gen.seq_len = uint_at(t, "seq_len", "task");
  c.task.gen.marker_len = uint_at(t, "marker_len", "task");
  c.task.gen.seed = uint_at(t, "seed", "task");
  c.task.tsv_dir = t.at("tsv_dir").get<std::string>();
  c.task.n_classes = uint_at(t, "n_classes", "task");
  if (!c.task.synthetic && c.task.tsv_dir.empty()) throw UsageError("config: task.tsv_dir is required for tsv tasks");

  c.teacher = encoder_from_json(r.at("teacher"));
  c.student = encoder_from_json(r.at("student"));
  if (c.student.max_seq_len != c.teacher.max_seq_len || c.student.d_model != c.teacher.d_model ||
      c.student.n_classes != c.teacher.n_classes || c.student.n_layers > c.teacher.n_layers) {
    throw UsageError("config: student must share seq length, width and classes with the teacher and not be deeper");
  }
  if (c.teacher.n_classes != c.task.n_classes) throw UsageError("config: teacher.n_classes differs from task.n_classes");
  if (c.task.synthetic && c.task.gen.seq_len != c.teacher.max_seq_len) {
    throw UsageError("config: task.seq_len differs from teacher.max_seq_len");
  }

  const Json& tt = r.at("teacher_training");
  c.teacher_training.epochs = uint_at(tt, "epochs", "teacher_training");
  c.teacher_training.batch_size = uint_at(tt, "batch_size", "teacher_training");
  c.teacher_training.seed = uint_at(tt, "seed", "teacher_training");
  c.teacher_training.adam = adam_from(tt.at("adam"));

  const Json& d = r.at("distill");
  c.distill.kind = loss::parse_loss_kind(d.at("kind").get<std::string>());
  c.distill.epochs = uint_at(d, "epochs", "distill");
  c.distill.batch_size = uint_at(d, "batch_size", "distill");
  c.distill.memory_size = uint_at(d, "memory_size", "distill");
  c.distill.kmeans_epochs = uint_at(d, "kmeans_epochs", "distill");
  c.distill.memory_init_std = num_at(d, "memory_init_std");
  c.distill.checkpoint_interval = uint_at(d, "checkpoint_interval", "distill");
  c.distill.weights = weights_from(d.at("weights"), loss::LossWeights{});
  c.distill.adam = adam_from(d.at("adam"));
  for (const auto& [key, value] : d.at("kind_weights").items()) {
    loss::parse_loss_kind(key);
    if (!value.is_object()) throw UsageError("config: distill.kind_weights." + key + " must be an object");
    weights_from(value, {});
  }

  c.kinds = kinds_from(r.at("kinds"));
  c.batch_size_study.kinds = kinds_from(r.at("batch_size_study").at("kinds"));
  for (const auto& s : r.at("batch_size_study").at("sizes")) {
    if (!is_uint(s) || s.get<std::size_t>() < 2) {
      throw UsageError("config: batch_size_study.sizes must be integers >= 2");
    }
    c.batch_size_study.sizes.push_back(s.get<std::size_t>());
  }

  const Json& a = r.at("analysis");
  c.analysis.pool_size = uint_at(a, "pool_size", "analysis");
  c.analysis.pool_batch_size = uint_at(a, "pool_batch_size", "analysis");
  c.analysis.pool_seed = uint_at(a, "pool_seed", "analysis");
  c.analysis.rd_batches = uint_at(a, "rd_batches", "analysis");
  c.analysis.rd_batch_size = uint_at(a, "rd_batch_size", "analysis");
  if (c.analysis.rd_batches == 0 || c.analysis.rd_batch_size < 2) {
    throw UsageError("config: analysis needs rd_batches >= 1 and rd_batch_size >= 2");
  }

  c.out_dir = r.at("out_dir").get<std::string>();
  if (c.out_dir.empty()) throw UsageError("config: out_dir must not be empty");
  for (const auto& s : r.at("seeds")) {
    if (!is_uint(s)) throw UsageError("config: seeds must be nonnegative integers");
    c.seeds.push_back(s.get<std::uint64_t>());
  }
  if (c.seeds.empty()) throw UsageError("config: seed list must not be empty");

  for (auto kind : c.kinds) c.distill_for(kind, c.seeds.front()).validate();
  return c;
}

train::DistillConfig ExperimentConfig::distill_for(loss::LossKind kind, std::uint64_t seed,
                                                   std::size_t batch_size) const {
  train::DistillConfig d = distill;
  d.kind = kind;
  d.seed = seed;
  if (batch_size) d.batch_size = batch_size;
  if (kind == loss::LossKind::kIntraLocal) d.weights.gamma_g = 0.0;
  const Json& kw = raw.at("distill").at("kind_weights");
  for (const auto& [key, value] : kw.items()) {
    if (loss::parse_loss_kind(key) == kind) d.weights = weights_from(value, d.weights);
  }
  return d;
}

// The output location is not part of an experiment's identity.
std::string ExperimentConfig::hash() const {
  Json identity = raw;
  identity.erase("out_dir");
  return hex64(fnv1a(identity.dump()));
}

void apply_override(Json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw UsageError("override '" + std::string(assignment) + "' is not of the form key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  Json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw UsageError("override key '" + key + "' has an empty component");
    if (!node->is_object()) throw UsageError("override key '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = Json::object();
    start = dot + 1;
  }
}

ExperimentConfig load(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config " + path.string());
  Json doc = Json::parse(in, nullptr, false, true);
  if (doc.is_discarded()) throw FormatError("config " + path.string() + " is not valid JSON");
  for (const auto& o : overrides) apply_override(doc, o);
  return parse(doc);
}

}  // namespace fsd::cfg
