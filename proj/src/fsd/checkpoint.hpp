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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fsd/memory.hpp"
#include "fsd/model.hpp"

// Checkpoint container.
//
//   bytes 0..7    magic "FSDCKPT\0"
//   bytes 8..11   u32 format version, little-endian
//   bytes 12..19  u64 header length H, little-endian
//   next H bytes  UTF-8 JSON header, keys sorted, no whitespace
//   remainder     f64 arrays, little-endian, in header order
//
// The header lists every array by name, shape and element offset, so a
// reader in another language needs nothing beyond this comment.
namespace fsd::ckpt {

inline constexpr char kMagic[8] = {'F', 'S', 'D', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kFormatVersion = 1;

struct Metadata {
  std::string role;  // "teacher", "teacher-memory", "student", ...
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  std::string config_hash;
  std::string kind;  // loss kind for students, empty otherwise
};

struct Checkpoint {
  // Model state; absent for a memory-only file.
  std::optional<model::EncoderConfig> config;
  model::EncoderParams params;
  std::optional<mem::MemoryBank> memory;
  Metadata meta;
};

std::vector<std::uint8_t> serialize(const Checkpoint& c);
// Throws FormatError on any structural problem.
Checkpoint deserialize(const std::vector<std::uint8_t>& bytes);

void save(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load(const std::filesystem::path& path);

}  // namespace fsd::ckpt
