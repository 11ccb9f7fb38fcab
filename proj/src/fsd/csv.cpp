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
#include "fsd/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "fsd/errors.hpp"

namespace fsd::csv {

std::string format(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string format(std::optional<double> v) { return v ? format(*v) : std::string(); }

Writer::Writer(std::vector<std::string> header) : columns_(header.size()) { row(header); }

void Writer::row(const std::vector<std::string>& fields) {
  if (fields.size() != columns_) throw UsageError("csv: row width differs from header width");
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) text_ += ',';
    text_ += fields[i];
  }
  text_ += '\n';
}

void Writer::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text_;
  if (!out) throw IoError("write failed for " + path.string());
}

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw FormatError("csv: missing column '" + std::string(name) + "'");
}

double Table::number(std::size_t row, std::string_view name) const {
  return parse_double(rows.at(row).at(column(name)));
}

double parse_double(std::string_view field) {
  if (field == "nan") return NAN;
  double v = 0.0;
  auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || end != field.data() + field.size()) {
    throw FormatError("csv: '" + std::string(field) + "' is not a number");
  }
  return v;
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  Table t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string f;
    while (std::getline(ss, f, ',')) out.push_back(f);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty CSV");
  t.header = split(line);
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    auto r = split(line);
    if (r.size() != t.header.size()) {
      throw FormatError(path.string() + ":" + std::to_string(n) + ": expected " + std::to_string(t.header.size()) +
                        " fields");
    }
    t.rows.push_back(std::move(r));
  }
  return t;
}

}  // namespace fsd::csv
