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

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "fsd/checkpoint.hpp"
#include "fsd/errors.hpp"
#include "test_util.hpp"

namespace fsd::ckpt {
namespace {

model::EncoderConfig small() {
  model::EncoderConfig c;
  c.n_layers = 2;
  c.d_model = 8;
  c.d_ff = 12;
  c.vocab_size = 10;
  c.max_seq_len = 4;
  return c;
}

Checkpoint sample(bool with_memory) {
  Checkpoint c;
  c.config = small();
  c.params = model::init_params(*c.config, 3);
  // Values whose bits are easy to get wrong.
  c.params.final_bias.mutable_data()[0] = -0.0;
  c.params.final_bias.mutable_data()[1] = 5e-324;
  c.params.final_bias.mutable_data()[2] = 0.1;
  if (with_memory) c.memory = mem::init_student_memory(3, 32, 4);
  c.meta = {"student", 9, 120, "00ff00ff00ff00ff", "ILG"};
  return c;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  for (bool with_memory : {false, true}) {
    Checkpoint c = sample(with_memory);
    auto bytes = serialize(c);
    Checkpoint back = deserialize(bytes);
    EXPECT_EQ(serialize(back), bytes);
    ASSERT_TRUE(back.config.has_value());
    EXPECT_EQ(*back.config, small());
    auto a = c.params.named();
    auto b = back.params.named();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].first, b[i].first);
      ASSERT_EQ(a[i].second->shape(), b[i].second->shape());
      EXPECT_EQ(std::memcmp(a[i].second->data().data(), b[i].second->data().data(), a[i].second->size() * 8), 0);
    }
    EXPECT_TRUE(std::signbit(back.params.final_bias.at(0)));
    EXPECT_EQ(back.meta.step, 120u);
    EXPECT_EQ(back.meta.kind, "ILG");
    EXPECT_EQ(back.memory.has_value(), with_memory);
    if (with_memory) {
      EXPECT_TRUE(back.memory->trainable);
      EXPECT_EQ(back.memory->centroids.to_vector(), c.memory->centroids.to_vector());
    }
  }
}

TEST(Checkpoint, MemoryOnlyFile) {
  Checkpoint c;
  c.memory = mem::MemoryBank{testing::randn({4, 6}, 1), false, mem::MemorySource::kTeacher};
  c.meta.role = "teacher-memory";
  Checkpoint back = deserialize(serialize(c));
  EXPECT_FALSE(back.config.has_value());
  EXPECT_FALSE(back.memory->trainable);
  EXPECT_FALSE(back.memory->centroids.requires_grad());
  EXPECT_EQ(back.memory->centroids.to_vector(), c.memory->centroids.to_vector());
}

TEST(Checkpoint, LayoutIsLittleEndianAfterHeader) {
  Checkpoint c;
  c.memory = mem::MemoryBank{num::Tensor::from({1, 2}, {1.0, -2.5}), false, mem::MemorySource::kTeacher};
  auto bytes = serialize(c);
  ASSERT_EQ(std::memcmp(bytes.data(), kMagic, 8), 0);
  EXPECT_EQ(bytes[8], 1);
  std::uint64_t hlen = 0;
  for (int i = 0; i < 8; ++i) hlen |= std::uint64_t{bytes[12 + i]} << (8 * i);
  ASSERT_EQ(bytes.size(), 20 + hlen + 16);
  const std::string header(bytes.begin() + 20, bytes.begin() + 20 + static_cast<std::ptrdiff_t>(hlen));
  EXPECT_NE(header.find("\"memory.centroids\""), std::string::npos);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t{bytes[20 + hlen + 8 + i]} << (8 * i);
  EXPECT_EQ(std::bit_cast<double>(bits), -2.5);
}

TEST(Checkpoint, CorruptInputsAreFormatErrors) {
  auto bytes = serialize(sample(false));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize(bad_magic), FormatError);
  auto bad_version = bytes;
  bad_version[8] = 9;
  EXPECT_THROW(deserialize(bad_version), FormatError);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 8);
  EXPECT_THROW(deserialize(truncated), FormatError);
  EXPECT_THROW(deserialize(std::vector<std::uint8_t>(5, 0)), FormatError);
}

TEST(Checkpoint, SaveLoadThroughFiles) {
  auto path = std::filesystem::temp_directory_path() / "fsd_ckpt_test.fsdc";
  Checkpoint c = sample(true);
  save(path, c);
  std::ifstream in(path, std::ios::binary);
  std::vector<std::uint8_t> disk((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(disk, serialize(c));
  EXPECT_EQ(serialize(load(path)), disk);
  EXPECT_THROW(load(path.string() + ".missing"), IoError);
}

}  // namespace
}  // namespace fsd::ckpt
