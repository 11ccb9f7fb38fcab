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
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fsd/model.hpp"

// Datasets: synthetic task generation, TSV ingestion, batching.
namespace fsd::data {

inline constexpr std::int32_t kPadId = 0;
inline constexpr std::int32_t kUnkId = 1;
inline constexpr std::int32_t kSepId = 2;
inline constexpr std::size_t kFirstWordId = 3;

enum class Task { kParity, kMarker, kPair };

std::string_view to_string(Task task);
Task parse_task(std::string_view text);

struct GenSpec {
  Task task = Task::kParity;
  std::size_t size = 2000;     // train lines; dev and test get size / 4 each
  std::size_t vocab = 60;      // distinct content words
  std::size_t seq_len = 16;    // upper bound on tokens per line, separator included
  std::size_t marker_len = 3;  // shared span length of the pair task
  std::uint64_t seed = 0;
};

// Writes train.tsv, dev.tsv and test.tsv into `dir`. Labels alternate before
// a seeded shuffle, so each split is balanced to within one line.
void gen_data(const GenSpec& spec, const std::filesystem::path& dir);

// One parsed TSV line.
struct Example {
  std::int32_t label = 0;
  std::vector<std::string> a;
  std::vector<std::string> b;
  bool has_b = false;
};

// Throws FormatError (with the 1-based line number) on malformed lines and
// IoError when the file cannot be read or holds no examples.
std::vector<Example> read_tsv(const std::filesystem::path& path, std::size_t n_classes);

// Word -> id, built from training examples; ids are assigned in sorted word
// order starting at kFirstWordId.
class Vocabulary {
 public:
  static Vocabulary build(std::span<const Example> train);
  std::int32_t id(const std::string& word) const;
  std::size_t size() const { return kFirstWordId + words_.size(); }
  const std::map<std::string, std::int32_t>& words() const { return words_; }

 private:
  std::map<std::string, std::int32_t> words_;
};

// Tokenized, padded examples: ids and mask are [size x seq].
struct Dataset {
  std::size_t seq = 0;
  std::vector<std::int32_t> ids;
  std::vector<std::uint8_t> mask;
  std::vector<std::int32_t> labels;

  std::size_t size() const { return labels.size(); }
  model::Batch batch(std::span<const std::size_t> indices) const;
  model::Batch range(std::size_t begin, std::size_t count) const;
};

// Pair examples are joined as a <sep> b. Sequences longer than seq_len are
// truncated.
Dataset encode(std::span<const Example> examples, const Vocabulary& vocab, std::size_t seq_len);

struct TaskData {
  Vocabulary vocab;
  Dataset train, dev, test;
};

// Loads <dir>/{train,dev,test}.tsv with the vocabulary of the train split.
TaskData load_task_dir(const std::filesystem::path& dir, std::size_t seq_len, std::size_t n_classes);

// Single-file load with a vocabulary built from that file.
Dataset load_tsv(const std::filesystem::path& path, std::size_t seq_len, std::size_t n_classes);

}  // namespace fsd::data
