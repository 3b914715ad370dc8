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

#include "permnm/nm_codec.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "permnm/error.hpp"

namespace permnm {

namespace {

bool is_stored(float v) { return std::bit_cast<std::uint32_t>(v) != 0u; }

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>((v >> (8 * k)) & 0xff));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(b[at + k]) << (8 * k);
  return v;
}

std::size_t value_count(std::uint32_t rows, std::uint32_t cols, const NMConfig& cfg) {
  return static_cast<std::size_t>(rows) * (cols / cfg.group) * cfg.keep();
}

}  // namespace

CompressedNM compress_nm(const Matrix<float>& w_masked, const NMConfig& cfg) {
  require_group_divides(w_masked.cols(), cfg, "compress_nm");
  CompressedNM c;
  c.rows = static_cast<std::uint32_t>(w_masked.rows());
  c.cols = static_cast<std::uint32_t>(w_masked.cols());
  c.config = cfg;
  c.values.reserve(value_count(c.rows, c.cols, cfg));
  c.indices.reserve(c.values.capacity());

  std::vector<bool> take(cfg.group);
  for (std::size_t r = 0; r < w_masked.rows(); ++r) {
    const auto row = w_masked.row(r);
    for (std::size_t g = 0; g * cfg.group < row.size(); ++g) {
      const auto group = row.subspan(g * cfg.group, cfg.group);
      std::size_t stored = 0;
      for (std::size_t k = 0; k < cfg.group; ++k) {
        take[k] = is_stored(group[k]);
        stored += take[k] ? 1 : 0;
      }
      require(stored <= cfg.keep(), ErrorCode::contract_violation,
              "compress_nm: row " + std::to_string(r) + " group " + std::to_string(g) +
                  " holds " + std::to_string(stored) + " non-zeros, more than " +
                  std::to_string(cfg.keep()) + " allowed by " + cfg.to_string());
      for (std::size_t k = 0; k < cfg.group && stored < cfg.keep(); ++k) {
        if (!take[k]) {
          take[k] = true;
          ++stored;
        }
      }
      for (std::size_t k = 0; k < cfg.group; ++k) {
        if (!take[k]) continue;
        c.values.push_back(group[k]);
        c.indices.push_back(static_cast<std::uint8_t>(k));
      }
    }
  }
  return c;
}

Matrix<float> decompress_nm(const CompressedNM& c) {
  c.config.validate();
  require(c.cols % c.config.group == 0, ErrorCode::contract_violation,
          "decompress_nm: cols not a multiple of the group width");
  const std::size_t count = value_count(c.rows, c.cols, c.config);
  require(c.values.size() == count && c.indices.size() == count, ErrorCode::blob_error,
          "decompress_nm: expected " + std::to_string(count) + " values and indices");
  Matrix<float> out(c.rows, c.cols);
  const std::size_t keep = c.config.keep();
  std::size_t at = 0;
  for (std::size_t r = 0; r < c.rows; ++r) {
    auto row = out.row(r);
    for (std::size_t g = 0; g * c.config.group < c.cols; ++g) {
      for (std::size_t k = 0; k < keep; ++k, ++at) {
        const std::size_t pos = c.indices[at];
        require(pos < c.config.group, ErrorCode::blob_error,
                "decompress_nm: index out of group range");
        row[g * c.config.group + pos] = c.values[at];
      }
    }
  }
  return out;
}

std::vector<std::uint8_t> serialize(const CompressedNM& c) {
  std::vector<std::uint8_t> out;
  out.reserve(kCompressedNMHeaderBytes + c.values.size() * 5);
  out.insert(out.end(), {'P', 'N', 'M', 'C'});
  put_u16(out, kCompressedNMVersion);
  put_u32(out, c.rows);
  put_u32(out, c.cols);
  out.push_back(static_cast<std::uint8_t>(c.config.n_zero));
  out.push_back(static_cast<std::uint8_t>(c.config.group));
  for (float v : c.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  out.insert(out.end(), c.indices.begin(), c.indices.end());
  return out;
}

CompressedNM deserialize_compressed(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= kCompressedNMHeaderBytes, ErrorCode::blob_error,
          "compressed N:M stream shorter than its header");
  require(std::memcmp(bytes.data(), "PNMC", 4) == 0, ErrorCode::blob_error,
          "compressed N:M stream has a bad magic");
  const std::uint16_t version = static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
  require(version == kCompressedNMVersion, ErrorCode::blob_error,
          "unsupported compressed N:M version " + std::to_string(version));
  CompressedNM c;
  c.rows = get_u32(bytes, 6);
  c.cols = get_u32(bytes, 10);
  c.config = NMConfig{bytes[14], bytes[15]};
  c.config.validate();
  require(c.rows > 0 && c.cols > 0 && c.cols % c.config.group == 0, ErrorCode::blob_error,
          "compressed N:M header has invalid dimensions");
  const std::size_t count = value_count(c.rows, c.cols, c.config);
  require(bytes.size() == kCompressedNMHeaderBytes + count * 5, ErrorCode::blob_error,
          "compressed N:M stream length does not match its header");
  c.values.resize(count);
  for (std::size_t i = 0; i < count; ++i)
    c.values[i] = std::bit_cast<float>(get_u32(bytes, kCompressedNMHeaderBytes + 4 * i));
  const auto idx = bytes.subspan(kCompressedNMHeaderBytes + 4 * count);
  c.indices.assign(idx.begin(), idx.end());
  const std::size_t keep = c.config.keep();
  for (std::size_t i = 0; i < count; ++i) {
    const bool ordered = i % keep == 0 || c.indices[i] > c.indices[i - 1];
    require(c.indices[i] < c.config.group && ordered, ErrorCode::blob_error,
            "compressed N:M stream has an invalid index at value " + std::to_string(i));
  }
  return c;
}

void save_compressed(const std::filesystem::path& path, const CompressedNM& c) {
  const auto bytes = serialize(c);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::io_error, "cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorCode::io_error, "failed writing " + path.string());
}

CompressedNM load_compressed(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::io_error, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize_compressed(bytes);
}

}  // namespace permnm
