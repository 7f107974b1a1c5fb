// Copyright 2026 The qsit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef QSIT_LEVELS_HPP
#define QSIT_LEVELS_HPP

#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qsit/error.hpp"

namespace qsit {

inline constexpr std::array<std::string_view, 5> kItuLabels = {
    "bad", "poor", "fair", "good", "excellent"};

// Two-level vocabulary used by binary good/poor scoring.
inline constexpr std::array<std::string_view, 2> kBinaryLabels = {"poor", "good"};

struct RatingLevel {
  int index = 1;  // 1-based
  std::string_view label;

  friend bool operator==(const RatingLevel& a, const RatingLevel& b) {
    return a.index == b.index;
  }
  friend auto operator<=>(const RatingLevel& a, const RatingLevel& b) {
    return a.index <=> b.index;
  }
};

inline std::string_view level_label(int index, int level_count) {
  if (level_count == 5) return kItuLabels.at(static_cast<std::size_t>(index - 1));
  if (level_count == 2) return kBinaryLabels.at(static_cast<std::size_t>(index - 1));
  return {};
}

inline RatingLevel level_at(int index, int level_count = 5) {
  if (index < 1 || index > level_count) {
    throw OutOfRangeError("level index " + std::to_string(index) + " outside 1.." +
                              std::to_string(level_count),
                          index);
  }
  return RatingLevel{index, level_label(index, level_count)};
}

inline std::optional<RatingLevel> level_from_label(std::string_view label,
                                                   int level_count = 5) {
  for (int i = 1; i <= level_count; ++i) {
    if (level_label(i, level_count) == label) return RatingLevel{i, level_label(i, level_count)};
  }
  return std::nullopt;
}

/// Score range [m, M] split into `level_count` equal-width intervals.
///
/// Interval i (1-based) is the half-open (edge(i-1), edge(i)]; the lowest
/// score m itself is assigned to level 1.
class LevelScale {
 public:
  LevelScale(double min_score, double max_score, int level_count = 5)
      : min_(min_score), max_(max_score), count_(level_count) {
    if (!std::isfinite(min_) || !std::isfinite(max_) || !(max_ > min_)) {
      throw ConfigError("invalid scale [" + std::to_string(min_) + ", " +
                        std::to_string(max_) + "]: max must exceed min");
    }
    if (count_ < 2) {
      throw ConfigError("level count must be at least 2, got " + std::to_string(count_));
    }
  }

  double min_score() const noexcept { return min_; }
  double max_score() const noexcept { return max_; }
  int level_count() const noexcept { return count_; }
  double width() const noexcept { return max_ - min_; }

  // m + (k / n) * (M - m), k = 0..n. The endpoints are returned exactly.
  double edge(int k) const noexcept {
    if (k <= 0) return min_;
    if (k >= count_) return max_;
    return min_ + (static_cast<double>(k) / count_) * (max_ - min_);
  }

  bool contains(double s) const noexcept { return s >= min_ && s <= max_; }

 private:
  double min_;
  double max_;
  int count_;
};

inline RatingLevel score_to_level(double s, const LevelScale& scale) {
  if (!scale.contains(s)) {
    throw OutOfRangeError("score " + std::to_string(s) + " outside scale [" +
                              std::to_string(scale.min_score()) + ", " +
                              std::to_string(scale.max_score()) + "]",
                          s);
  }
  const int n = scale.level_count();
  for (int i = 1; i < n; ++i) {
    if (s <= scale.edge(i)) return level_at(i, n);
  }
  return level_at(n, n);
}

inline int level_to_score(const RatingLevel& level) noexcept { return level.index; }

/// Per-level frequencies. The form is carried explicitly: counts are never
/// silently treated as probabilities.
struct FrequencyVector {
  enum class Form { kNormalized, kCounts };

  std::vector<double> values;
  Form form = Form::kNormalized;

  static FrequencyVector normalized(std::vector<double> v) {
    return FrequencyVector{std::move(v), Form::kNormalized};
  }
  static FrequencyVector counts(std::vector<double> v) {
    return FrequencyVector{std::move(v), Form::kCounts};
  }

  double sum() const { return std::accumulate(values.begin(), values.end(), 0.0); }

  FrequencyVector to_normalized() const {
    if (form == Form::kNormalized) return *this;
    const double total = sum();
    if (!(total > 0.0)) throw NormalizationError("frequency counts sum to zero", total);
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i] / total;
    return normalized(std::move(out));
  }
};

inline constexpr double kNormalizationTolerance = 1e-9;

inline double mos_from_frequencies(const FrequencyVector& f) {
  if (f.form != FrequencyVector::Form::kNormalized) {
    throw NormalizationError("frequencies are raw counts; normalize first", f.sum());
  }
  for (double v : f.values) {
    if (!(v >= 0.0)) throw NormalizationError("negative or NaN frequency", f.sum());
  }
  const double total = f.sum();
  if (std::abs(total - 1.0) > kNormalizationTolerance) {
    throw NormalizationError("frequencies sum to " + std::to_string(total) + ", expected 1",
                             total);
  }
  double mos = 0.0;
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    mos += f.values[i] * static_cast<double>(i + 1);
  }
  return mos;
}

}  // namespace qsit

#endif  // QSIT_LEVELS_HPP
