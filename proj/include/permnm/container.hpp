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
#include <string>
#include <vector>

#include "permnm/matrix.hpp"
#include "permnm/model.hpp"

namespace permnm {

// Manifest (JSON) next to a blob of little-endian f32 values:
//
//   {
//     "format": "permnm-tensors", "version": 1, "blob": "<file name>",
//     "tensors": [{"name", "shape": [rows, cols], "dtype": "f32",
//                  "byte_offset", "byte_length"}, ...],
//     "topology": {"layers": [{"name", "weight", "input", "activation"}]}
//   }
//
// The blob path is resolved relative to the manifest. Topology is optional
// (calibration containers carry a single tensor and no layers).
struct TensorEntry {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::uint64_t byte_offset = 0;
  std::uint64_t byte_length = 0;
};

struct TopologyEntry {
  std::string name;
  std::string weight;  // tensor name
  std::string input;
  std::string activation;
};

struct TensorContainer {
  std::vector<TensorEntry> tensors;
  std::vector<TopologyEntry> topology;
  std::vector<std::uint8_t> blob;

  // Appends a tensor at the end of the blob.
  void add(const std::string& name, const Matrix<float>& m);
  const TensorEntry& entry(const std::string& name) const;
  Matrix<float> tensor(const std::string& name) const;
  // Checks offsets/lengths against shapes and the blob, and name uniqueness.
  void validate() const;

  std::string manifest_json(const std::string& blob_name) const;
};

inline constexpr std::string_view kCalibrationTensor = "calibration";

// Writes <path> (manifest) and <path-without-extension>.bin (blob).
void save_container(const std::filesystem::path& manifest_path, const TensorContainer& c);
// manifest_error for malformed JSON/fields, blob_error for a blob that does
// not cover the manifest, shape_mismatch for inconsistent shapes, io_error
// for unreadable files.
TensorContainer load_container(const std::filesystem::path& manifest_path);

TensorContainer model_container(const Model<float>& model);
Model<float> model_from_container(const TensorContainer& c);

void save_model(const std::filesystem::path& path, const Model<float>& model);
Model<float> load_model(const std::filesystem::path& path);
void save_calibration(const std::filesystem::path& path, const Matrix<float>& x);
Matrix<float> load_calibration(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const void* data, std::size_t size);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace permnm
