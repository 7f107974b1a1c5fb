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

#ifndef QSIT_SCORING_HPP
#define QSIT_SCORING_HPP

#include <algorithm>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsit/error.hpp"
#include "qsit/levels.hpp"

namespace qsit {

struct LevelLogits {
  std::string item_id;
  std::vector<double> x;  // one logit per level, lowest level first
};

struct LevelProbabilities {
  std::vector<double> p;
};

struct PredictedScore {
  std::string item_id;
  double score = 0.0;
};

namespace detail {

inline std::string level_name(std::size_t i, std::size_t n) {
  auto label = level_label(static_cast<int>(i + 1), static_cast<int>(n));
  return label.empty() ? "level " + std::to_string(i + 1) : std::string(label);
}

}  // namespace detail

// Closed-set softmax over the level logits, shifted by the max logit.
inline LevelProbabilities softmax_levels(std::span<const double> x) {
  if (x.empty()) throw MalformedLogitsError("no level logits");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) {
      throw MalformedLogitsError("non-finite logit for level '" +
                                 detail::level_name(i, x.size()) + "'");
    }
  }
  const double top = *std::max_element(x.begin(), x.end());
  LevelProbabilities out;
  out.p.resize(x.size());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out.p[i] = std::exp(x[i] - top);
    total += out.p[i];
  }
  for (double& v : out.p) v /= total;
  return out;
}

inline LevelProbabilities softmax_levels(const LevelLogits& logits) {
  return softmax_levels(std::span<const double>(logits.x));
}

// Probability-weighted level index: sum_i i * p_i.
inline double expected_level(const LevelProbabilities& probs) {
  double s = 0.0;
  for (std::size_t i = 0; i < probs.p.size(); ++i) s += static_cast<double>(i + 1) * probs.p[i];
  return s;
}

inline PredictedScore score_from_logits(const LevelLogits& logits) {
  return PredictedScore{logits.item_id, expected_level(softmax_levels(logits))};
}

/// e^good / (e^good + e^poor), evaluated as a logistic of the difference.
inline double binary_score(double x_good, double x_poor) {
  if (!std::isfinite(x_good)) throw MalformedLogitsError("non-finite logit for level 'good'");
  if (!std::isfinite(x_poor)) throw MalformedLogitsError("non-finite logit for level 'poor'");
  const double d = x_good - x_poor;
  if (d >= 0.0) return 1.0 / (1.0 + std::exp(-d));
  const double e = std::exp(d);
  return e / (1.0 + e);
}

// Affine map from the native [1, n] score range onto a dataset's [m, M].
inline double rescale_score(double score, const LevelScale& target, int level_count) {
  return target.min_score() +
         (score - 1.0) / (level_count - 1) * (target.max_score() - target.min_score());
}

enum class ScoreMode { kFiveLevel, kBinary };

struct BatchOptions {
  ScoreMode mode = ScoreMode::kFiveLevel;
  bool strict = false;
  std::optional<LevelScale> rescale;
};

struct Diagnostic {
  std::size_t line = 0;
  std::string message;
};

struct BatchResult {
  std::vector<PredictedScore> scores;
  std::vector<Diagnostic> diagnostics;
};

namespace detail {

inline double require_number(const nlohmann::json& obj, const std::string& key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw MalformedLogitsError("missing logit '" + key + "'");
  if (!it->is_number()) throw MalformedLogitsError("logit '" + key + "' is not a number");
  return it->get<double>();
}

inline PredictedScore parse_and_score(const std::string& line, const BatchOptions& opts) {
  nlohmann::json rec;
  try {
    rec = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedLogitsError(std::string("invalid JSON: ") + e.what());
  }
  if (!rec.is_object()) throw MalformedLogitsError("record is not an object");
  auto id = rec.find("id");
  if (id == rec.end() || !id->is_string()) throw MalformedLogitsError("missing string 'id'");

  PredictedScore out{id->get<std::string>(), 0.0};
  int levels = 5;
  if (opts.mode == ScoreMode::kBinary) {
    levels = 2;
    out.score = binary_score(require_number(rec, "good"), require_number(rec, "poor"));
  } else {
    auto logits = rec.find("logits");
    if (logits == rec.end() || !logits->is_object()) {
      throw MalformedLogitsError("missing 'logits' object");
    }
    LevelLogits ll{out.item_id, {}};
    for (auto label : kItuLabels) ll.x.push_back(require_number(*logits, std::string(label)));
    out.score = score_from_logits(ll).score;
  }
  if (opts.rescale) out.score = rescale_score(out.score, *opts.rescale, levels);
  return out;
}

}  // namespace detail

/// Scores one JSON record per line. Blank lines are skipped. In lenient mode
/// malformed records become diagnostics; strict mode throws on the first one.
inline BatchResult score_batch(std::istream& in, const BatchOptions& opts = {}) {
  BatchResult result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      result.scores.push_back(detail::parse_and_score(line, opts));
    } catch (const DataError& e) {
      if (opts.strict) throw ParseError("line " + std::to_string(lineno) + ": " + e.what(), lineno);
      result.diagnostics.push_back({lineno, e.what()});
    }
  }
  return result;
}

inline void write_scores(std::ostream& out, std::span<const PredictedScore> scores) {
  for (const auto& s : scores) {
    out << nlohmann::json{{"id", s.item_id}, {"score", s.score}}.dump() << '\n';
  }
}

}  // namespace qsit

#endif  // QSIT_SCORING_HPP
