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

#include "permnm/error.hpp"

#include <atomic>
#include <iostream>

namespace permnm {

namespace {
std::atomic<bool> g_warnings_enabled{true};
}

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::contract_violation: return "contract_violation";
    case ErrorCode::shape_mismatch: return "shape_mismatch";
    case ErrorCode::not_a_permutation: return "not_a_permutation";
    case ErrorCode::non_finite: return "non_finite";
    case ErrorCode::overflow: return "overflow";
    case ErrorCode::too_large: return "too_large";
    case ErrorCode::manifest_error: return "manifest_error";
    case ErrorCode::blob_error: return "blob_error";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::divergence: return "divergence";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

void warn(const std::string& message) {
  if (g_warnings_enabled.load(std::memory_order_relaxed)) {
    std::cerr << "permnm: warning: " << message << '\n';
  }
}

void set_warnings_enabled(bool enabled) {
  g_warnings_enabled.store(enabled, std::memory_order_relaxed);
}

}  // namespace permnm
