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
#include <optional>
#include <string>

#include "fsd/config.hpp"
#include "fsd/data.hpp"
#include "fsd/memory.hpp"
#include "fsd/model.hpp"

// Stage orchestration over a run directory:
//
//   <out>/data/{train,dev,test}.tsv            gen-data (synthetic tasks)
//   <out>/teacher/teacher.fsdc                  train-teacher
//   <out>/memory/teacher_memory.fsdc            post-train-memory
//   <out>/seed_<s>/<kind>_bs<b>/student.fsdc    distill
//       metrics.csv eval.csv checkpoints/       distill
//       rd_curve.csv                            analyze-rd
//       restoration.csv                         analyze-restoration
//       heatmap.csv heatmap_summary.csv         heatmap
//   <out>/seed_<s>/ranks.csv                    rank
//   <out>/report.csv                            report
//
// Every stage directory gets a manifest.json. A stage whose inputs are
// missing, or were produced under a different configuration, throws
// DependencyError.
namespace fsd::pipe {

const char* version();

struct RunSpec {
  loss::LossKind kind = loss::LossKind::kVKD;
  std::uint64_t seed = 0;
  std::size_t batch_size = 0;  // 0: the configured batch size
};

class Experiment {
 public:
  explicit Experiment(cfg::ExperimentConfig config);

  const cfg::ExperimentConfig& config() const { return config_; }

  std::filesystem::path data_dir() const;
  std::filesystem::path teacher_dir() const;
  std::filesystem::path memory_dir() const;
  std::filesystem::path seed_dir(std::uint64_t seed) const;
  std::filesystem::path run_dir(const RunSpec& run) const;

  // Hashes of the configuration slices each stage depends on.
  std::string teacher_key() const;
  std::string memory_key() const;
  std::string student_key() const;

  void gen_data();
  // Returns the final train accuracy.
  double train_teacher();
  void post_train_memory();
  void distill(const RunSpec& run);
  void analyze_rd(const RunSpec& run);
  void analyze_restoration(const RunSpec& run);
  void heatmap(const RunSpec& run);
  void rank(std::uint64_t seed);
  void report();

  // Every stage for all configured kinds and seeds, then rank and report.
  void run_all();

 private:
  std::size_t batch_size(const RunSpec& run) const;
  const data::TaskData& task_data();
  const model::EncoderParams& teacher();
  const mem::MemoryBank& teacher_memory();
  model::EncoderParams student(const RunSpec& run);
  std::vector<model::Batch> rd_batches();
  void write_config_copy() const;

  cfg::ExperimentConfig config_;
  std::optional<data::TaskData> data_;
  std::optional<model::EncoderParams> teacher_;
  std::optional<mem::MemoryBank> memory_;
};

}  // namespace fsd::pipe
