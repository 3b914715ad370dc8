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
#include <optional>
#include <string>
#include <vector>

#include "permnm/permlearn.hpp"

namespace permnm {

enum class Precision { f32, f64 };
std::string_view to_string(Precision p);
Precision parse_precision(std::string_view text);

inline constexpr int kReportVersion = 1;

struct LayerReport {
  std::string name;
  std::size_t c_out = 0;
  std::size_t c_in = 0;
  std::vector<std::size_t> block_boundaries;
  bool learned = true;
  std::optional<std::size_t> best_step;
  double identity_loss = 0;
  double heuristic_cp_loss = 0;
  double permllm_loss = 0;
  std::optional<double> oracle_loss;
  double identity_retained = 0;
  double heuristic_cp_retained = 0;
  double permllm_retained = 0;
  std::optional<double> oracle_retained;
  std::uint64_t oracle_evaluated = 0;
  std::string oracle_note;  // why the oracle did not run, if it did not
  double mask_density = 0;
  bool mask_valid = false;
};

struct Timing {
  double train_seconds = 0;
  double oracle_seconds = 0;
  double total_seconds = 0;
};

struct Report {
  std::string command;
  TrainConfig config;
  NMConfig nm;
  Precision precision = Precision::f32;
  TrainMode resolved_mode = TrainMode::layerwise;
  std::vector<LayerReport> layers;
  double model_identity_loss = 0;
  double model_heuristic_cp_loss = 0;
  double model_permllm_loss = 0;
  bool diverged = false;
  std::string diagnostic;
  Timing timing;
};

// Keys in a fixed order; doubles printed round-trip exact. The "timing"
// object is the only part that varies between identical runs.
std::string report_json(const Report& report, bool include_timing = true);

}  // namespace permnm
