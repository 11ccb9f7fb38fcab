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
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fsd/data.hpp"
#include "fsd/model.hpp"
#include "fsd/train.hpp"

// Experiment configuration: one JSON file per experiment. Unknown keys are
// rejected so a typo never silently falls back to a default.
namespace fsd::cfg {

using Json = nlohmann::json;

struct TaskSpec {
  bool synthetic = true;
  data::GenSpec gen;                 // used when synthetic
  std::filesystem::path tsv_dir;     // used otherwise: train/dev/test.tsv
  std::size_t n_classes = 2;
};

struct AnalysisSettings {
  std::size_t pool_size = 8;         // heatmap batches
  std::size_t pool_batch_size = 32;
  std::uint64_t pool_seed = 7;
  std::size_t rd_batches = 4;        // held-out RD evaluation batches from dev
  std::size_t rd_batch_size = 32;
};

struct BatchSizeStudy {
  std::vector<loss::LossKind> kinds;
  std::vector<std::size_t> sizes;
};

struct ExperimentConfig {
  std::string name;
  TaskSpec task;
  model::EncoderConfig teacher, student;
  train::TeacherTrainConfig teacher_training;
  // Base distillation settings; per-kind weight overrides live in `raw`.
  train::DistillConfig distill;
  std::vector<loss::LossKind> kinds;
  BatchSizeStudy batch_size_study;
  AnalysisSettings analysis;
  std::filesystem::path out_dir;
  std::vector<std::uint64_t> seeds;
  // Canonical document: defaults filled in, keys sorted.
  Json raw;

  // Distill settings for one run: base weights, then the kind's overrides,
  // then seed and (nonzero) batch size.
  train::DistillConfig distill_for(loss::LossKind kind, std::uint64_t seed, std::size_t batch_size = 0) const;
  // 16 hex digits of FNV-1a over the canonical dump.
  std::string hash() const;
};

ExperimentConfig parse(const Json& doc);

// Reads `path` and applies "dotted.key=value" overrides before parsing. The
// value is read as JSON when it parses, otherwise as a string.
ExperimentConfig load(const std::filesystem::path& path,
                      const std::vector<std::string>& overrides = {});

void apply_override(Json& doc, std::string_view assignment);

Json to_json(const model::EncoderConfig& c);
model::EncoderConfig encoder_from_json(const Json& j);

std::string hex64(std::uint64_t v);

}  // namespace fsd::cfg
