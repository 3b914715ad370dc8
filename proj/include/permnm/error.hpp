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

#include <stdexcept>
#include <string>
#include <string_view>

namespace permnm {

enum class ErrorCode {
  contract_violation,
  shape_mismatch,
  not_a_permutation,
  non_finite,
  overflow,
  too_large,
  manifest_error,
  blob_error,
  io_error,
  divergence,
};

std::string_view to_string(ErrorCode code);

// Every failure surfaced by the library is a permnm::Error; callers switch on
// code() when they need to tell variants apart (the CLI maps them to exit codes).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

// Warnings go to stderr unless silenced (tests silence them).
void warn(const std::string& message);
void set_warnings_enabled(bool enabled);

}  // namespace permnm
