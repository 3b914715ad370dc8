/* Copyright (c) 2026 The permnm Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "permnm/matrix.hpp"
#include "permnm/sparsity.hpp"

namespace permnm {

// Compressed N:M storage. On disk (all integers and floats little-endian):
//
//   offset  size  field
//   0       4     magic "PNMC"
//   4       2     version (u16, currently 1)
//   6       4     rows (u32)
//   10      4     cols (u32)
//   14      1     N (u8, zeros per group)
//   15      1     M (u8, group width)
//   16      4*K   values, f32, row-major, group by group, K = rows*cols*(M-N)/M
//   16+4K   K     indices, one u8 per value: its position inside the group
struct CompressedNM {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  NMConfig config;
  std::vector<float> values;
  std::vector<std::uint8_t> indices;

  friend bool operator==(const CompressedNM&, const CompressedNM&) = default;
};

inline constexpr std::uint16_t kCompressedNMVersion = 1;
inline constexpr std::size_t kCompressedNMHeaderBytes = 16;

// Every group of w_masked may hold at most M - N stored entries (anything other
// than +0.0 counts, so -0.0 round-trips). Groups with fewer are padded with
// the lowest-index zero positions. Throws naming the first offending
// (row, group) otherwise.
CompressedNM compress_nm(const Matrix<float>& w_masked, const NMConfig& cfg);
Matrix<float> decompress_nm(const CompressedNM& c);

std::vector<std::uint8_t> serialize(const CompressedNM& c);
CompressedNM deserialize_compressed(std::span<const std::uint8_t> bytes);

void save_compressed(const std::filesystem::path& path, const CompressedNM& c);
CompressedNM load_compressed(const std::filesystem::path& path);

}  // namespace permnm
