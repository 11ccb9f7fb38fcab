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

#include "fsd/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fsd/errors.hpp"
#include "fsd/rng.hpp"

namespace fsd::data {

namespace {

std::string word(std::size_t i) {
  std::string s = std::to_string(i);
  if (s.size() < 2) s.insert(0, 1, '0');
  return "w" + s;
}

std::vector<std::size_t> random_words(Rng& rng, std::size_t n, std::size_t vocab) {
  std::vector<std::size_t> out(n);
  for (auto& w : out) w = rng.below(vocab);
  return out;
}

std::string join(const std::vector<std::size_t>& ws) {
  std::string s;
  for (std::size_t i = 0; i < ws.size(); ++i) {
    if (i) s += ' ';
    s += word(ws[i]);
  }
  return s;
}

// Label 1 when odd-indexed words outnumber even-indexed ones; lengths are odd
// so there are no ties.
std::string parity_line(Rng& rng, const GenSpec& spec, int label) {
  const std::size_t max_len = std::max<std::size_t>(5, spec.seq_len - (spec.seq_len % 2 == 0));
  const std::size_t n_lengths = (max_len - 5) / 2 + 1;
  for (;;) {
    const std::size_t len = 5 + 2 * rng.below(n_lengths);
    auto ws = random_words(rng, len, spec.vocab);
    const auto odd = std::count_if(ws.begin(), ws.end(), [](std::size_t w) { return w % 2 == 1; });
    const int y = 2 * static_cast<std::size_t>(odd) > len ? 1 : 0;
    if (y == label) return std::to_string(label) + "\t" + join(ws);
  }
}

bool has_marker(const std::vector<std::size_t>& ws) {
  for (std::size_t i = 0; i + 1 < ws.size(); ++i) {
    if (ws[i] == 0 && ws[i + 1] == 1) return true;
  }
  return false;
}

// Label 1 when the bigram "w00 w01" occurs.
std::string marker_line(Rng& rng, const GenSpec& spec, int label) {
  const std::size_t min_len = 4;
  const std::size_t len = min_len + rng.below(spec.seq_len - min_len + 1);
  for (;;) {
    auto ws = random_words(rng, len, spec.vocab);
    if (label == 1) {
      const std::size_t at = rng.below(len - 1);
      ws[at] = 0;
      ws[at + 1] = 1;
      return "1\t" + join(ws);
    }
    if (!has_marker(ws)) return "0\t" + join(ws);
  }
}

// The vocabulary splits into two topics (lower and upper half). text_a is
// drawn from one topic. Label 1: text_b is drawn from the same topic and
// contains a contiguous marker_len span of text_a. Label 0: text_b is drawn
// from the other topic, so the texts share no word.
std::string pair_line(Rng& rng, const GenSpec& spec, int label) {
  const std::size_t la = (spec.seq_len - 1) / 2;
  const std::size_t lb = spec.seq_len - 1 - la;
  const std::size_t half = spec.vocab / 2;
  auto draw = [&](std::size_t n, std::size_t topic) {
    std::vector<std::size_t> ws(n);
    for (auto& w : ws) w = topic * half + rng.below(half);
    return ws;
  };
  const std::size_t topic = rng.below(2);
  auto a = draw(la, topic);
  auto b = draw(lb, label == 1 ? topic : 1 - topic);
  if (label == 1) {
    const std::size_t k = spec.marker_len;
    const std::size_t from = rng.below(la - k + 1);
    const std::size_t to = rng.below(lb - k + 1);
    std::copy(a.begin() + from, a.begin() + from + k, b.begin() + to);
  }
  return std::to_string(label) + "\t" + join(a) + "\t" + join(b);
}

void write_split(const GenSpec& spec, const std::filesystem::path& path, std::size_t n,
                 std::uint64_t counter) {
  Rng rng(derive_seed(spec.seed, "data", counter));
  std::vector<std::string> lines;
  lines.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    switch (spec.task) {
      case Task::kParity: lines.push_back(parity_line(rng, spec, label)); break;
      case Task::kMarker: lines.push_back(marker_line(rng, spec, label)); break;
      case Task::kPair: lines.push_back(pair_line(rng, spec, label)); break;
    }
  }
  rng.shuffle(std::span<std::string>(lines));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> words_of(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

}  // namespace

std::string_view to_string(Task task) {
  switch (task) {
    case Task::kParity: return "parity";
    case Task::kMarker: return "marker";
    case Task::kPair: return "pair";
  }
  return "?";
}

Task parse_task(std::string_view text) {
  if (text == "parity") return Task::kParity;
  if (text == "marker") return Task::kMarker;
  if (text == "pair") return Task::kPair;
  throw UsageError("unknown task '" + std::string(text) + "' (expected parity, marker, pair)");
}

void gen_data(const GenSpec& spec, const std::filesystem::path& dir) {
  if (spec.size < 4) throw UsageError("gen-data: size must be at least 4");
  if (spec.vocab < 4) throw UsageError("gen-data: vocab must be at least 4");
  if (spec.seq_len < 5) throw UsageError("gen-data: seq_len must be at least 5");
  if (spec.task == Task::kPair) {
    const std::size_t la = (spec.seq_len - 1) / 2;
    if (spec.marker_len == 0 || spec.marker_len > la) {
      throw UsageError("gen-data: marker_len must lie in [1, " + std::to_string(la) + "]");
    }
    if (spec.vocab < 2 * spec.seq_len) throw UsageError("gen-data: pair task needs vocab >= 2 * seq_len");
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_split(spec, dir / "train.tsv", spec.size, 0);
  write_split(spec, dir / "dev.tsv", spec.size / 4, 1);
  write_split(spec, dir / "test.tsv", spec.size / 4, 2);
}

std::vector<Example> read_tsv(const std::filesystem::path& path, std::size_t n_classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<Example> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    auto fields = split(line, '\t');
    if (fields.size() < 2 || fields.size() > 3) {
      throw FormatError(where + "expected label<TAB>text_a[<TAB>text_b]");
    }
    Example ex;
    const auto& lf = fields[0];
    auto [ptr, errc] = std::from_chars(lf.data(), lf.data() + lf.size(), ex.label);
    if (errc != std::errc{} || ptr != lf.data() + lf.size()) {
      throw FormatError(where + "label '" + lf + "' is not an integer");
    }
    if (ex.label < 0 || static_cast<std::size_t>(ex.label) >= n_classes) {
      throw FormatError(where + "label " + lf + " outside [0, " + std::to_string(n_classes) + ")");
    }
    ex.a = words_of(fields[1]);
    if (ex.a.empty()) throw FormatError(where + "empty text_a");
    if (fields.size() == 3) {
      ex.has_b = true;
      ex.b = words_of(fields[2]);
    }
    out.push_back(std::move(ex));
  }
  if (out.empty()) throw IoError(path.string() + " holds no examples");
  return out;
}

Vocabulary Vocabulary::build(std::span<const Example> train) {
  std::vector<std::string> all;
  for (const auto& ex : train) {
    all.insert(all.end(), ex.a.begin(), ex.a.end());
    all.insert(all.end(), ex.b.begin(), ex.b.end());
  }
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  Vocabulary v;
  for (std::size_t i = 0; i < all.size(); ++i) {
    v.words_.emplace(all[i], static_cast<std::int32_t>(kFirstWordId + i));
  }
  return v;
}

std::int32_t Vocabulary::id(const std::string& w) const {
  auto it = words_.find(w);
  return it == words_.end() ? kUnkId : it->second;
}

model::Batch Dataset::batch(std::span<const std::size_t> indices) const {
  model::Batch b;
  b.size = indices.size();
  b.seq = seq;
  b.ids.reserve(b.size * seq);
  b.mask.reserve(b.size * seq);
  for (std::size_t i : indices) {
    if (i >= size()) throw ShapeError("dataset: index out of range");
    b.ids.insert(b.ids.end(), ids.begin() + i * seq, ids.begin() + (i + 1) * seq);
    b.mask.insert(b.mask.end(), mask.begin() + i * seq, mask.begin() + (i + 1) * seq);
    b.labels.push_back(labels[i]);
  }
  return b;
}

model::Batch Dataset::range(std::size_t begin, std::size_t count) const {
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), begin);
  return batch(idx);
}

Dataset encode(std::span<const Example> examples, const Vocabulary& vocab, std::size_t seq_len) {
  if (seq_len == 0) throw UsageError("encode: seq_len must be positive");
  Dataset d;
  d.seq = seq_len;
  for (const auto& ex : examples) {
    std::vector<std::int32_t> toks;
    for (const auto& w : ex.a) toks.push_back(vocab.id(w));
    if (ex.has_b) {
      toks.push_back(kSepId);
      for (const auto& w : ex.b) toks.push_back(vocab.id(w));
    }
    toks.resize(std::min(toks.size(), seq_len));
    const std::size_t n = toks.size();
    toks.resize(seq_len, kPadId);
    d.ids.insert(d.ids.end(), toks.begin(), toks.end());
    for (std::size_t t = 0; t < seq_len; ++t) d.mask.push_back(t < n ? 1 : 0);
    d.labels.push_back(ex.label);
  }
  return d;
}

TaskData load_task_dir(const std::filesystem::path& dir, std::size_t seq_len, std::size_t n_classes) {
  auto train = read_tsv(dir / "train.tsv", n_classes);
  auto dev = read_tsv(dir / "dev.tsv", n_classes);
  auto test = read_tsv(dir / "test.tsv", n_classes);
  TaskData t{Vocabulary::build(train), {}, {}, {}};
  t.train = encode(train, t.vocab, seq_len);
  t.dev = encode(dev, t.vocab, seq_len);
  t.test = encode(test, t.vocab, seq_len);
  return t;
}

Dataset load_tsv(const std::filesystem::path& path, std::size_t seq_len, std::size_t n_classes) {
  auto ex = read_tsv(path, n_classes);
  return encode(ex, Vocabulary::build(ex), seq_len);
}

}  // namespace fsd::data
