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
#include "fsd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "fsd/config.hpp"
#include "fsd/errors.hpp"

namespace fsd::ckpt {

namespace {

using cfg::Json;

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename U>
U get_le(const std::uint8_t* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

struct ArrayRef {
  std::string name;
  const num::Tensor* tensor;
};

std::vector<ArrayRef> arrays_of(const Checkpoint& c) {
  std::vector<ArrayRef> out;
  if (c.config) {
    for (const auto& [name, t] : c.params.named()) out.push_back({name, t});
  }
  if (c.memory) out.push_back({"memory.centroids", &c.memory->centroids});
  return out;
}

}  // namespace

std::vector<std::uint8_t> serialize(const Checkpoint& c) {
  Json header;
  header["format"] = "fsdbench-checkpoint";
  header["meta"] = {{"role", c.meta.role},
                    {"seed", c.meta.seed},
                    {"step", c.meta.step},
                    {"config_hash", c.meta.config_hash},
                    {"kind", c.meta.kind}};
  header["encoder"] = c.config ? cfg::to_json(*c.config) : Json(nullptr);
  header["memory"] = c.memory ? Json{{"trainable", c.memory->trainable},
                                     {"source", c.memory->source == mem::MemorySource::kTeacher ? "teacher" : "student"}}
                              : Json(nullptr);
  Json arrays = Json::array();
  std::uint64_t offset = 0;
  const auto refs = arrays_of(c);
  for (const auto& a : refs) {
    arrays.push_back({{"name", a.name}, {"shape", a.tensor->shape()}, {"offset", offset}});
    offset += a.tensor->size();
  }
  header["arrays"] = arrays;
  header["elements"] = offset;
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, kFormatVersion);
  put_le<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + offset * 8);
  for (const auto& a : refs) {
    for (double x : a.tensor->data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(x));
  }
  return out;
}

Checkpoint deserialize(const std::vector<std::uint8_t>& bytes) {
  constexpr std::size_t kPrefix = 8 + 4 + 8;
  if (bytes.size() < kPrefix || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw FormatError("checkpoint: bad magic");
  }
  const auto version = get_le<std::uint32_t>(bytes.data() + 8);
  if (version != kFormatVersion) {
    throw FormatError("checkpoint: unsupported format version " + std::to_string(version));
  }
  const auto hlen = get_le<std::uint64_t>(bytes.data() + 12);
  if (hlen > bytes.size() - kPrefix) throw FormatError("checkpoint: truncated header");
  Json header = Json::parse(bytes.begin() + kPrefix, bytes.begin() + kPrefix + static_cast<std::ptrdiff_t>(hlen),
                            nullptr, false);
  if (header.is_discarded() || !header.is_object()) throw FormatError("checkpoint: header is not valid JSON");

  try {
    const std::size_t payload = kPrefix + hlen;
    const auto elements = header.at("elements").get<std::uint64_t>();
    if ((bytes.size() - payload) % 8 != 0 || (bytes.size() - payload) / 8 != elements) {
      throw FormatError("checkpoint: payload holds " + std::to_string((bytes.size() - payload) / 8) +
                        " values, header declares " + std::to_string(elements));
    }
    Checkpoint c;
    const Json& m = header.at("meta");
    c.meta.role = m.at("role").get<std::string>();
    c.meta.seed = m.at("seed").get<std::uint64_t>();
    c.meta.step = m.at("step").get<std::uint64_t>();
    c.meta.config_hash = m.at("config_hash").get<std::string>();
    c.meta.kind = m.at("kind").get<std::string>();

    // Expected layout from the config; init values are overwritten below.
    std::vector<std::pair<std::string, num::Tensor*>> slots;
    if (!header.at("encoder").is_null()) {
      c.config = cfg::encoder_from_json(header.at("encoder"));
      c.params = model::init_params(*c.config, 0);
      slots = c.params.named();
    }
    if (!header.at("memory").is_null()) {
      c.memory.emplace();
      c.memory->trainable = header.at("memory").at("trainable").get<bool>();
      c.memory->source = header.at("memory").at("source").get<std::string>() == "teacher"
                             ? mem::MemorySource::kTeacher
                             : mem::MemorySource::kStudent;
      slots.push_back({"memory.centroids", &c.memory->centroids});
    }
    const Json& arrays = header.at("arrays");
    if (arrays.size() != slots.size()) throw FormatError("checkpoint: array count does not match the encoder config");
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const Json& a = arrays[i];
      const auto name = a.at("name").get<std::string>();
      const auto shape = a.at("shape").get<num::Shape>();
      const auto off = a.at("offset").get<std::uint64_t>();
      if (name != slots[i].first) throw FormatError("checkpoint: expected array " + slots[i].first + ", found " + name);
      const std::size_t n = num::shape_size(shape);
      if (slots[i].second->defined() && slots[i].second->shape() != shape) {
        throw FormatError("checkpoint: array " + name + " has shape " + num::shape_string(shape) + ", expected " +
                          num::shape_string(slots[i].second->shape()));
      }
      if (off + n > elements) throw FormatError("checkpoint: array " + name + " runs past the payload");
      std::vector<double> values(n);
      const std::uint8_t* p = bytes.data() + payload + off * 8;
      for (std::size_t k = 0; k < n; ++k) values[k] = std::bit_cast<double>(get_le<std::uint64_t>(p + 8 * k));
      const bool grad = name == "memory.centroids" ? c.memory->trainable : false;
      *slots[i].second = num::Tensor::from(shape, std::move(values), grad);
    }
    return c;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("checkpoint: malformed header: ") + e.what());
  }
}

void save(const std::filesystem::path& path, const Checkpoint& c) {
  const auto bytes = serialize(c);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return deserialize(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace fsd::ckpt
