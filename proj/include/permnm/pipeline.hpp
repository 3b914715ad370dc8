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

#include <filesystem>
#include <optional>

#include "permnm/fold.hpp"
#include "permnm/model.hpp"
#include "permnm/reference.hpp"
#include "permnm/report.hpp"

namespace permnm {

struct RunOptions {
  TrainConfig train;
  NMConfig nm;
  Precision precision = Precision::f32;
  // compare also runs the exhaustive oracle on layers small enough for it.
  bool with_oracle = false;
  std::uint64_t oracle_limit = kOracleMaxCandidates;
};

struct RunOutput {
  Report report;
  FoldedModel<float> folded;
};

// train -> fold_and_export -> report. With out_dir set, writes
//   report.json, permutations.json, <layer>.pnmc, pruned.json/pruned.bin
// into it (created if missing).
RunOutput run_pipeline(const Model<float>& model, const Matrix<float>& calibration,
                       const RunOptions& options, const std::string& command,
                       const std::optional<std::filesystem::path>& out_dir = std::nullopt);

}  // namespace permnm
