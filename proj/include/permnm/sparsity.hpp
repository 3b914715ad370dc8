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

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "permnm/matrix.hpp"

namespace permnm {

// N:M sparsity: in every run of `group` (M) consecutive weights of a row,
// `n_zero` (N) are pruned and M - N kept.
struct NMConfig {
  std::size_t n_zero = 2;
  std::size_t group = 4;

  std::size_t keep() const noexcept { return group - n_zero; }
  void validate() const;
  std::string to_string() const;
  // "N:M", e.g. "2:4".
  static NMConfig parse(std::string_view text);

  friend bool operator==(const NMConfig&, const NMConfig&) = default;
};

// Non-negative, finite per-weight importance.
template <class T>
struct ImportanceScores {
  Matrix<T> scores;

  ImportanceScores() = default;
  explicit ImportanceScores(Matrix<T> s);
};

// Binary mask stored as 0/1 values so it composes with hadamard().
template <class T>
struct SparsityMask {
  Matrix<T> mask;
};

// Per-group softmax weights; each group lies on the probability simplex.
template <class T>
struct SoftMask {
  Matrix<T> weights;
};

enum class ImportanceMetric { magnitude, wanda };

std::string_view to_string(ImportanceMetric metric);
ImportanceMetric parse_metric(std::string_view text);

template <class T>
ImportanceScores<T> magnitude_scores(const Matrix<T>& w);

// |W_ij| * ||X_j||_2, the norm taken over all calibration rows of x.
template <class T>
ImportanceScores<T> wanda_scores(const Matrix<T>& w, const Matrix<T>& x);

// Metric hook: (weight, calibration inputs) -> scores. Additional metrics
// plug in by supplying another function of this shape.
template <class T>
using ScoreFunction = std::function<ImportanceScores<T>(const Matrix<T>&, const Matrix<T>&)>;

template <class T>
ScoreFunction<T> score_function(ImportanceMetric metric);

// Keeps the M - N largest scores of every group; ties go to the lower column.
template <class T>
SparsityMask<T> nm_mask(const ImportanceScores<T>& s, const NMConfig& cfg);

template <class T>
SoftMask<T> soft_mask(const ImportanceScores<T>& s, const NMConfig& cfg);

// W with pruned entries set to +0.0. (hadamard would leave -0.0 behind for
// negative weights, which the compressed codec counts as stored.)
template <class T>
Matrix<T> apply_mask(const SparsityMask<T>& m, const Matrix<T>& w);

template <class T>
T retained_score(const ImportanceScores<T>& s, const SparsityMask<T>& m);

struct GroupViolation {
  std::size_t row = 0;
  std::size_t group = 0;
  std::size_t count = 0;
};

// First (row, group) whose mask does not keep exactly M - N entries.
template <class T>
std::optional<GroupViolation> find_mask_violation(const SparsityMask<T>& m, const NMConfig& cfg);

// First (row, group) of a pruned weight holding more than M - N nonzeros.
template <class T>
std::optional<GroupViolation> find_weight_violation(const Matrix<T>& w, const NMConfig& cfg);

// Fraction of ones in the mask.
template <class T>
double mask_density(const SparsityMask<T>& m);

// Throws unless `cols` is a multiple of the group width.
void require_group_divides(std::size_t cols, const NMConfig& cfg, const char* who);

}  // namespace permnm
