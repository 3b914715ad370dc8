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

#include "permnm/sparsity.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "permnm/error.hpp"

namespace permnm {

void NMConfig::validate() const {
  require(group > 0 && n_zero > 0 && n_zero < group, ErrorCode::contract_violation,
          "N:M config " + to_string() + " must satisfy 0 < N < M");
  require(group <= 255, ErrorCode::contract_violation,
          "N:M config " + to_string() + ": group width above 255 is not supported");
}

std::string NMConfig::to_string() const {
  return std::to_string(n_zero) + ":" + std::to_string(group);
}

NMConfig NMConfig::parse(std::string_view text) {
  const auto colon = text.find(':');
  require(colon != std::string_view::npos, ErrorCode::contract_violation,
          "N:M config '" + std::string(text) + "' must look like N:M");
  auto parse_part = [&](std::string_view part) {
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
    require(ec == std::errc() && ptr == part.data() + part.size() && !part.empty(),
            ErrorCode::contract_violation, "N:M config '" + std::string(text) + "' is malformed");
    return value;
  };
  NMConfig cfg{parse_part(text.substr(0, colon)), parse_part(text.substr(colon + 1))};
  cfg.validate();
  return cfg;
}

void require_group_divides(std::size_t cols, const NMConfig& cfg, const char* who) {
  cfg.validate();
  require(cols % cfg.group == 0, ErrorCode::contract_violation,
          std::string(who) + ": column count " + std::to_string(cols) +
              " is not a multiple of group width " + std::to_string(cfg.group));
}

template <class T>
ImportanceScores<T>::ImportanceScores(Matrix<T> s) : scores(std::move(s)) {
  for (T v : scores.data()) {
    require(std::isfinite(v) && v >= T{0}, ErrorCode::contract_violation,
            "importance scores must be finite and non-negative");
  }
}

std::string_view to_string(ImportanceMetric metric) {
  switch (metric) {
    case ImportanceMetric::magnitude: return "magnitude";
    case ImportanceMetric::wanda: return "wanda";
  }
  return "unknown";
}

ImportanceMetric parse_metric(std::string_view text) {
  if (text == "magnitude") return ImportanceMetric::magnitude;
  if (text == "wanda") return ImportanceMetric::wanda;
  fail(ErrorCode::contract_violation, "unknown importance metric '" + std::string(text) + "'");
}

template <class T>
ImportanceScores<T> magnitude_scores(const Matrix<T>& w) {
  require(w.all_finite(), ErrorCode::non_finite, "magnitude_scores: non-finite weight");
  Matrix<T> s = w;
  for (T& v : s.data()) v = std::abs(v);
  return ImportanceScores<T>(std::move(s));
}

template <class T>
ImportanceScores<T> wanda_scores(const Matrix<T>& w, const Matrix<T>& x) {
  require(!x.empty(), ErrorCode::contract_violation, "wanda_scores: no calibration samples");
  require(x.cols() == w.cols(), ErrorCode::shape_mismatch,
          "wanda_scores: calibration has " + std::to_string(x.cols()) +
              " features, weight expects " + std::to_string(w.cols()));
  std::vector<T> norms(x.cols(), T{0});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row(r);
    for (std::size_t j = 0; j < x.cols(); ++j) norms[j] += row[j] * row[j];
  }
  for (T& n : norms) n = std::sqrt(n);
  Matrix<T> s(w.rows(), w.cols());
  for (std::size_t i = 0; i < w.rows(); ++i)
    for (std::size_t j = 0; j < w.cols(); ++j) s(i, j) = std::abs(w(i, j)) * norms[j];
  return ImportanceScores<T>(std::move(s));
}

template <class T>
ScoreFunction<T> score_function(ImportanceMetric metric) {
  switch (metric) {
    case ImportanceMetric::magnitude:
      return [](const Matrix<T>& w, const Matrix<T>&) { return magnitude_scores(w); };
    case ImportanceMetric::wanda:
      return [](const Matrix<T>& w, const Matrix<T>& x) { return wanda_scores(w, x); };
  }
  fail(ErrorCode::contract_violation, "unknown importance metric");
}

template <class T>
SparsityMask<T> nm_mask(const ImportanceScores<T>& s, const NMConfig& cfg) {
  require_group_divides(s.scores.cols(), cfg, "nm_mask");
  const std::size_t m = cfg.group;
  Matrix<T> mask(s.scores.rows(), s.scores.cols());
  std::vector<std::size_t> order(m);
  for (std::size_t r = 0; r < s.scores.rows(); ++r) {
    const auto row = s.scores.row(r);
    for (std::size_t c0 = 0; c0 < row.size(); c0 += m) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      // stable + strict greater keeps lower indices first among equals
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return row[c0 + a] > row[c0 + b];
      });
      for (std::size_t k = 0; k < cfg.keep(); ++k) mask(r, c0 + order[k]) = T{1};
    }
  }
  return {std::move(mask)};
}

template <class T>
SoftMask<T> soft_mask(const ImportanceScores<T>& s, const NMConfig& cfg) {
  require_group_divides(s.scores.cols(), cfg, "soft_mask");
  Matrix<T> out(s.scores.rows(), s.scores.cols());
  for (std::size_t r = 0; r < s.scores.rows(); ++r) {
    for (std::size_t c0 = 0; c0 < s.scores.cols(); c0 += cfg.group) {
      const auto p = softmax<T>(s.scores.row(r).subspan(c0, cfg.group));
      std::copy(p.begin(), p.end(), out.row(r).begin() + c0);
    }
  }
  return {std::move(out)};
}

template <class T>
Matrix<T> apply_mask(const SparsityMask<T>& m, const Matrix<T>& w) {
  require(m.mask.same_shape(w), ErrorCode::shape_mismatch, "apply_mask: mask and weight shapes differ");
  Matrix<T> out(w.rows(), w.cols());
  for (std::size_t i = 0; i < w.size(); ++i)
    out.data()[i] = m.mask.data()[i] != T{0} ? w.data()[i] : T{0};
  return out;
}

template <class T>
T retained_score(const ImportanceScores<T>& s, const SparsityMask<T>& m) {
  require(s.scores.same_shape(m.mask), ErrorCode::shape_mismatch,
          "retained_score: score and mask shapes differ");
  T total{0};
  for (std::size_t i = 0; i < m.mask.size(); ++i) {
    if (m.mask.data()[i] != T{0}) total += s.scores.data()[i];
  }
  return total;
}

template <class T>
std::optional<GroupViolation> find_mask_violation(const SparsityMask<T>& m, const NMConfig& cfg) {
  require_group_divides(m.mask.cols(), cfg, "find_mask_violation");
  for (std::size_t r = 0; r < m.mask.rows(); ++r) {
    const auto row = m.mask.row(r);
    for (std::size_t g = 0; g * cfg.group < row.size(); ++g) {
      std::size_t ones = 0;
      for (std::size_t k = 0; k < cfg.group; ++k) {
        const T v = row[g * cfg.group + k];
        if (v == T{1}) {
          ++ones;
        } else if (v != T{0}) {
          return GroupViolation{r, g, cfg.group + 1};
        }
      }
      if (ones != cfg.keep()) return GroupViolation{r, g, ones};
    }
  }
  return std::nullopt;
}

template <class T>
std::optional<GroupViolation> find_weight_violation(const Matrix<T>& w, const NMConfig& cfg) {
  require_group_divides(w.cols(), cfg, "find_weight_violation");
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const auto row = w.row(r);
    for (std::size_t g = 0; g * cfg.group < row.size(); ++g) {
      std::size_t nonzero = 0;
      for (std::size_t k = 0; k < cfg.group; ++k) nonzero += row[g * cfg.group + k] != T{0} ? 1 : 0;
      if (nonzero > cfg.keep()) return GroupViolation{r, g, nonzero};
    }
  }
  return std::nullopt;
}

template <class T>
double mask_density(const SparsityMask<T>& m) {
  std::size_t ones = 0;
  for (T v : m.mask.data()) ones += v != T{0} ? 1 : 0;
  return static_cast<double>(ones) / static_cast<double>(m.mask.size());
}

#define PERMNM_INSTANTIATE(T)                                                                \
  template struct ImportanceScores<T>;                                                       \
  template ImportanceScores<T> magnitude_scores(const Matrix<T>&);                           \
  template ImportanceScores<T> wanda_scores(const Matrix<T>&, const Matrix<T>&);             \
  template ScoreFunction<T> score_function(ImportanceMetric);                                \
  template SparsityMask<T> nm_mask(const ImportanceScores<T>&, const NMConfig&);             \
  template SoftMask<T> soft_mask(const ImportanceScores<T>&, const NMConfig&);               \
  template Matrix<T> apply_mask(const SparsityMask<T>&, const Matrix<T>&);                   \
  template T retained_score(const ImportanceScores<T>&, const SparsityMask<T>&);             \
  template std::optional<GroupViolation> find_mask_violation(const SparsityMask<T>&,         \
                                                             const NMConfig&);               \
  template std::optional<GroupViolation> find_weight_violation(const Matrix<T>&,             \
                                                               const NMConfig&);             \
  template double mask_density(const SparsityMask<T>&);

PERMNM_INSTANTIATE(float)
PERMNM_INSTANTIATE(double)

#undef PERMNM_INSTANTIATE

}  // namespace permnm
