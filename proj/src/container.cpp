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

#include "permnm/container.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <set>

#include <json.hpp>

#include "permnm/error.hpp"

namespace permnm {

namespace {

using Json = nlohmann::ordered_json;

static_assert(std::endian::native == std::endian::little,
              "container I/O assumes a little-endian host");

constexpr std::string_view kFormat = "permnm-tensors";
constexpr int kVersion = 1;

std::filesystem::path blob_path_for(const std::filesystem::path& manifest) {
  auto p = manifest;
  p.replace_extension(".bin");
  return p;
}

template <class V>
V field(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) fail(ErrorCode::manifest_error, where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<V>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::manifest_error, where + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace

void TensorContainer::add(const std::string& name, const Matrix<float>& m) {
  TensorEntry e{name, m.rows(), m.cols(), blob.size(), m.size() * sizeof(float)};
  blob.resize(blob.size() + e.byte_length);
  std::memcpy(blob.data() + e.byte_offset, m.data().data(), e.byte_length);
  tensors.push_back(std::move(e));
}

const TensorEntry& TensorContainer::entry(const std::string& name) const {
  for (const auto& e : tensors)
    if (e.name == name) return e;
  fail(ErrorCode::manifest_error, "container: no tensor named '" + name + "'");
}

Matrix<float> TensorContainer::tensor(const std::string& name) const {
  const auto& e = entry(name);
  Matrix<float> m(e.rows, e.cols);
  std::memcpy(m.data().data(), blob.data() + e.byte_offset, e.byte_length);
  return m;
}

void TensorContainer::validate() const {
  std::set<std::string> names;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> ranges;
  for (const auto& e : tensors) {
    require(names.insert(e.name).second, ErrorCode::manifest_error,
            "container: duplicate tensor '" + e.name + "'");
    require(e.rows > 0 && e.cols > 0, ErrorCode::shape_mismatch,
            "container: tensor '" + e.name + "' has an empty shape");
    require(e.byte_length == static_cast<std::uint64_t>(e.rows) * e.cols * sizeof(float),
            ErrorCode::shape_mismatch,
            "container: tensor '" + e.name + "' byte_length " + std::to_string(e.byte_length) +
                " does not match shape " + std::to_string(e.rows) + "x" + std::to_string(e.cols));
    require(e.byte_offset % sizeof(float) == 0, ErrorCode::manifest_error,
            "container: tensor '" + e.name + "' offset is not 4-byte aligned");
    require(e.byte_offset <= UINT64_MAX - e.byte_length, ErrorCode::manifest_error,
            "container: tensor '" + e.name + "' offset overflows");
    require(e.byte_offset + e.byte_length <= blob.size(), ErrorCode::blob_error,
            "blob shorter than manifest extent (tensor '" + e.name + "' ends at byte " +
                std::to_string(e.byte_offset + e.byte_length) + ", blob has " +
                std::to_string(blob.size()) + ")");
    ranges.emplace_back(e.byte_offset, e.byte_offset + e.byte_length);
  }
  std::sort(ranges.begin(), ranges.end());
  for (std::size_t i = 1; i < ranges.size(); ++i)
    require(ranges[i].first >= ranges[i - 1].second, ErrorCode::manifest_error,
            "container: tensor byte ranges overlap");
  for (const auto& t : topology)
    require(names.count(t.weight) == 1, ErrorCode::manifest_error,
            "container: layer '" + t.name + "' refers to missing tensor '" + t.weight + "'");
}

std::string TensorContainer::manifest_json(const std::string& blob_name) const {
  Json tensors_json = Json::array();
  for (const auto& e : tensors) {
    tensors_json.push_back({{"name", e.name},
                            {"shape", {e.rows, e.cols}},
                            {"dtype", "f32"},
                            {"byte_offset", e.byte_offset},
                            {"byte_length", e.byte_length}});
  }
  Json doc = {{"format", kFormat}, {"version", kVersion}, {"blob", blob_name},
              {"tensors", std::move(tensors_json)}};
  if (!topology.empty()) {
    Json layers = Json::array();
    for (const auto& t : topology)
      layers.push_back({{"name", t.name}, {"weight", t.weight}, {"input", t.input},
                        {"activation", t.activation}});
    doc["topology"] = {{"layers", std::move(layers)}};
  }
  return doc.dump(2) + "\n";
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::io_error, "cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const std::filesystem::path& path, const void* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::io_error, "cannot write '" + path.string() + "'");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  require(static_cast<bool>(out), ErrorCode::io_error, "short write to '" + path.string() + "'");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, text.data(), text.size());
}

void save_container(const std::filesystem::path& manifest_path, const TensorContainer& c) {
  c.validate();
  const auto blob = blob_path_for(manifest_path);
  write_file(blob, c.blob.data(), c.blob.size());
  write_text(manifest_path, c.manifest_json(blob.filename().string()));
}

TensorContainer load_container(const std::filesystem::path& manifest_path) {
  const auto bytes = read_file(manifest_path);
  Json doc;
  try {
    doc = Json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::manifest_error, "manifest '" + manifest_path.string() + "': " + e.what());
  }
  const std::string where = "manifest '" + manifest_path.string() + "'";
  require(doc.is_object(), ErrorCode::manifest_error, where + ": not a JSON object");
  require(field<std::string>(doc, "format", where) == kFormat, ErrorCode::manifest_error,
          where + ": unexpected format tag");
  require(field<int>(doc, "version", where) == kVersion, ErrorCode::manifest_error,
          where + ": unsupported version");

  TensorContainer c;
  const auto tensors = field<Json>(doc, "tensors", where);
  require(tensors.is_array(), ErrorCode::manifest_error, where + ": 'tensors' must be an array");
  for (const auto& t : tensors) {
    TensorEntry e;
    e.name = field<std::string>(t, "name", where);
    const auto shape = field<std::vector<std::size_t>>(t, "shape", where + " tensor '" + e.name + "'");
    require(shape.size() == 2, ErrorCode::shape_mismatch,
            where + ": tensor '" + e.name + "' must be two-dimensional");
    require(field<std::string>(t, "dtype", where) == "f32", ErrorCode::manifest_error,
            where + ": tensor '" + e.name + "' dtype must be f32");
    e.rows = shape[0];
    e.cols = shape[1];
    e.byte_offset = field<std::uint64_t>(t, "byte_offset", where);
    e.byte_length = field<std::uint64_t>(t, "byte_length", where);
    c.tensors.push_back(std::move(e));
  }
  if (doc.contains("topology")) {
    for (const auto& l : field<Json>(doc.at("topology"), "layers", where)) {
      c.topology.push_back({field<std::string>(l, "name", where), field<std::string>(l, "weight", where),
                            field<std::string>(l, "input", where),
                            l.contains("activation") ? field<std::string>(l, "activation", where)
                                                     : std::string("none")});
    }
  }
  const auto blob_name = field<std::string>(doc, "blob", where);
  c.blob = read_file(manifest_path.parent_path() / blob_name);
  c.validate();
  return c;
}

TensorContainer model_container(const Model<float>& model) {
  model.validate();
  TensorContainer c;
  for (const auto& l : model.layers) {
    const std::string tensor = l.name + ".weight";
    c.add(tensor, l.weight);
    c.topology.push_back({l.name, tensor, l.input, std::string(to_string(l.activation))});
  }
  return c;
}

Model<float> model_from_container(const TensorContainer& c) {
  require(!c.topology.empty(), ErrorCode::manifest_error, "container has no model topology");
  Model<float> model;
  for (const auto& t : c.topology)
    model.layers.push_back({t.name, c.tensor(t.weight), t.input, parse_activation(t.activation)});
  model.validate();
  return model;
}

void save_model(const std::filesystem::path& path, const Model<float>& model) {
  save_container(path, model_container(model));
}

Model<float> load_model(const std::filesystem::path& path) {
  return model_from_container(load_container(path));
}

void save_calibration(const std::filesystem::path& path, const Matrix<float>& x) {
  TensorContainer c;
  c.add(std::string(kCalibrationTensor), x);
  save_container(path, c);
}

Matrix<float> load_calibration(const std::filesystem::path& path) {
  const auto c = load_container(path);
  require(c.tensors.size() == 1, ErrorCode::manifest_error,
          "calibration container must hold exactly one tensor");
  return c.tensor(c.tensors.front().name);
}

}  // namespace permnm
