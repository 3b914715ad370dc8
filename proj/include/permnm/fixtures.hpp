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
#include <vector>

#include "permnm/model.hpp"
#include "permnm/permlearn.hpp"

namespace permnm {

inline constexpr std::size_t kDefaultCalibrationSamples = 128;

// dims = {d0, d1, ..., dk}: k layers "fc1".."fck", layer i maps d(i-1) -> d(i).
// Weights ~ N(0, 1/fan_in); relu between layers, none after the last.
Model<float> generate_mlp(const std::vector<std::size_t>& dims, std::uint64_t seed);

// samples x features, standard normal.
Matrix<float> generate_calibration(std::size_t samples, std::size_t features, std::uint64_t seed);

// The small oracle-checkable layer: W 4x8 and `samples` calibration rows,
// both standard normal from Rng(seed), one block of 8, 2:4.
LayerProblem<double> toy_layer(std::uint64_t seed, ImportanceMetric metric = ImportanceMetric::wanda,
                               std::size_t samples = kDefaultCalibrationSamples);

// A single-layer instance where the score-maximizing heuristic permutation
// keeps more importance than the identity yet reconstructs the output worse.
struct ScoreTrapInstance {
  Model<float> model;        // one layer "fc", 4 x 8
  Matrix<float> calibration;
  std::uint64_t trial = 0;   // index of the first hit
  double identity_retained = 0;
  double heuristic_retained = 0;
  double identity_mse = 0;
  double heuristic_mse = 0;
  double identity_loss = 0;  // cosine
  double heuristic_loss = 0;
};

// Random search over 4x8 magnitude-scored 2:4 instances (single block) with
// `samples` Gaussian calibration rows. Throws if nothing is found within
// max_trials.
ScoreTrapInstance search_score_trap(std::uint64_t seed, std::size_t samples = 16,
                         std::size_t max_trials = 100000);

// Re-evaluates an instance (identity vs. heuristic) from its tensors.
ScoreTrapInstance evaluate_score_trap(const Model<float>& model, const Matrix<float>& calibration);

}  // namespace permnm
