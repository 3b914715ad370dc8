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
#include <span>
#include <vector>

namespace permnm {

bool is_bijection(std::span<const std::size_t> perm);

// Index form of a hard permutation matrix P: perm[j] is the source index that
// lands at position j, so P has its ones at (perm[j], j).
class PermutationIndices {
 public:
  PermutationIndices() = default;
  // Throws not_a_permutation unless perm is a bijection on [0, n).
  explicit PermutationIndices(std::vector<std::size_t> perm);

  static PermutationIndices identity(std::size_t n);

  std::size_t size() const noexcept { return perm_.size(); }
  std::size_t operator[](std::size_t position) const { return perm_[position]; }
  std::span<const std::size_t> indices() const noexcept { return perm_; }

  PermutationIndices inverse() const;
  bool is_identity() const noexcept;

  friend bool operator==(const PermutationIndices&, const PermutationIndices&) = default;

 private:
  std::vector<std::size_t> perm_;
};

}  // namespace permnm
