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

#ifndef QSIT_METRICS_HPP
#define QSIT_METRICS_HPP

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "qsit/error.hpp"
#include "qsit/levels.hpp"

namespace qsit {

/// Predictions paired index-wise with ground truth.
struct PairedSample {
  std::span<const double> predictions;
  std::span<const double> ground_truth;

  void validate() const {
    if (predictions.size() != ground_truth.size()) {
      throw DegenerateSampleError("prediction/ground-truth length mismatch: " +
                                  std::to_string(predictions.size()) + " vs " +
                                  std::to_string(ground_truth.size()));
    }
    if (predictions.size() < 2) {
      throw DegenerateSampleError("need at least 2 pairs, got " +
                                  std::to_string(predictions.size()));
    }
    for (std::size_t i = 0; i < predictions.size(); ++i) {
      if (std::isnan(predictions[i]) || std::isnan(ground_truth[i])) {
        throw DegenerateSampleError("NaN at index " + std::to_string(i));
      }
    }
  }
};

// 1-based ranks; tied values share the mean of the ranks they span.
inline std::vector<double> fractional_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

namespace detail {

inline double pearson_unchecked(std::span<const double> x, std::span<const double> y,
                                const char* what) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw DegenerateSampleError(std::string("zero variance in ") + what);
  }
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

}  // namespace detail

inline double srcc(const PairedSample& s) {
  s.validate();
  const auto rp = fractional_ranks(s.predictions);
  const auto rg = fractional_ranks(s.ground_truth);
  return detail::pearson_unchecked(rp, rg, "ranks");
}

/// Fitted parameters of the monotone logistic
///   f(x) = (b1 - b2) / (1 + exp(-(x - b3) / |b4|)) + b2.
struct LogisticMap {
  double b1 = 0.0, b2 = 0.0, b3 = 0.0, b4 = 1.0;

  double operator()(double x) const {
    return (b1 - b2) / (1.0 + std::exp(-(x - b3) / std::abs(b4))) + b2;
  }
};

// Levenberg-Marquardt fit of the logistic from predictions onto ground truth.
inline LogisticMap fit_logistic(std::span<const double> x, std::span<const double> y) {
  const auto [ymin, ymax] = std::minmax_element(y.begin(), y.end());
  const double xmean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double xvar = 0.0;
  for (double v : x) xvar += (v - xmean) * (v - xmean);
  const double xsd = std::sqrt(xvar / static_cast<double>(x.size()));
  LogisticMap m{*ymax, *ymin, xmean, xsd > 0.0 ? xsd : 1.0};

  auto sse = [&](const LogisticMap& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (p(x[i]) - y[i]) * (p(x[i]) - y[i]);
    return s;
  };

  double lambda = 1e-3;
  double cost = sse(m);
  for (int iter = 0; iter < 200; ++iter) {
    Eigen::MatrixXd jac(static_cast<Eigen::Index>(x.size()), 4);
    Eigen::VectorXd res(static_cast<Eigen::Index>(x.size()));
    const double s4 = std::abs(m.b4);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double z = (x[i] - m.b3) / s4;
      const double g = 1.0 / (1.0 + std::exp(-z));
      const auto r = static_cast<Eigen::Index>(i);
      res(r) = y[i] - m(x[i]);
      jac(r, 0) = g;
      jac(r, 1) = 1.0 - g;
      const double dg = (m.b1 - m.b2) * g * (1.0 - g);
      jac(r, 2) = -dg / s4;
      jac(r, 3) = -dg * z / s4 * (m.b4 < 0 ? -1.0 : 1.0);
    }
    const Eigen::Matrix4d jtj = jac.transpose() * jac;
    const Eigen::Vector4d jtr = jac.transpose() * res;
    bool improved = false;
    while (lambda < 1e12) {
      Eigen::Matrix4d damped = jtj;
      damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const Eigen::Vector4d step = damped.ldlt().solve(jtr);
      LogisticMap trial{m.b1 + step(0), m.b2 + step(1), m.b3 + step(2), m.b4 + step(3)};
      if (trial.b4 == 0.0) trial.b4 = 1e-12;
      const double c = sse(trial);
      if (std::isfinite(c) && c < cost) {
        const double rel = (cost - c) / std::max(cost, 1e-300);
        m = trial;
        cost = c;
        lambda = std::max(lambda / 10.0, 1e-12);
        improved = true;
        if (rel < 1e-12) return m;
        break;
      }
      lambda *= 10.0;
    }
    if (!improved) break;
  }
  return m;
}

struct PlccOptions {
  bool logistic = false;  // map predictions through a fitted logistic first
};

inline double plcc(const PairedSample& s, PlccOptions opts = {}) {
  s.validate();
  if (!opts.logistic) return detail::pearson_unchecked(s.predictions, s.ground_truth, "sample");
  const auto map = fit_logistic(s.predictions, s.ground_truth);
  std::vector<double> mapped(s.predictions.size());
  std::transform(s.predictions.begin(), s.predictions.end(), mapped.begin(), map);
  return detail::pearson_unchecked(mapped, s.ground_truth, "sample");
}

inline double avg_metric(const PairedSample& s, PlccOptions opts = {}) {
  return 0.5 * (srcc(s) + plcc(s, opts));
}

struct CorrelationPair {
  double srcc = 0.0;
  double plcc = 0.0;
};

/// Agreement between raw scores and their level-quantized reconstruction.
inline CorrelationPair conversion_precision(std::span<const double> scores,
                                            const LevelScale& scale) {
  std::vector<double> quantized;
  quantized.reserve(scores.size());
  for (double s : scores) quantized.push_back(level_to_score(score_to_level(s, scale)));
  PairedSample sample{scores, quantized};
  return {srcc(sample), plcc(sample)};
}

// ---------------------------------------------------------------------------
// Multiple-choice accuracy

inline constexpr std::array<std::string_view, 3> kQuestionTypes = {"yes-or-no", "what", "how"};
inline constexpr std::array<std::string_view, 4> kQuadrants = {
    "distortion", "other", "in-context distortion", "in-context other"};

struct McqRecord {
  std::string question_id;
  std::string question_type;
  std::string quadrant;
  std::vector<std::string> choices;
  std::string gold;
  std::string predicted;
};

namespace detail {

inline std::string fold(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  std::string out(s.substr(b, e - b + 1));
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace detail

/// Maps free-form model output onto one of the choices. The folded answer is
/// compared against the full choice texts first, then a leading choice letter
/// ("b", "b.", "(b) ...") is tried. Returns the matched choice index or -1.
inline int match_choice(std::string_view predicted, std::span<const std::string> choices) {
  const std::string ans = detail::fold(predicted);
  if (ans.empty()) return -1;
  for (std::size_t i = 0; i < choices.size(); ++i) {
    if (ans == detail::fold(choices[i])) return static_cast<int>(i);
  }
  std::size_t pos = 0;
  if (ans[pos] == '(') ++pos;
  if (pos < ans.size() && ans[pos] >= 'a' && ans[pos] <= 'z') {
    const std::size_t letter = static_cast<std::size_t>(ans[pos] - 'a');
    const std::size_t next = pos + 1;
    const bool delimited = next == ans.size() || ans[next] == '.' || ans[next] == ')' ||
                           ans[next] == ':' || ans[next] == ' ' || ans[next] == ',';
    if (delimited && letter < choices.size()) return static_cast<int>(letter);
  }
  return -1;
}

inline bool mcq_correct(const McqRecord& r) {
  const int idx = match_choice(r.predicted, r.choices);
  return idx >= 0 && detail::fold(r.choices[static_cast<std::size_t>(idx)]) == detail::fold(r.gold);
}

struct AccuracyCell {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const { return total ? static_cast<double>(correct) / total : 0.0; }
};

struct McqReport {
  AccuracyCell overall;
  std::map<std::string, AccuracyCell> by_type;
  std::map<std::string, AccuracyCell> by_quadrant;
};

inline McqReport mcq_report(std::span<const McqRecord> records) {
  if (records.empty()) throw DataError("no multiple-choice records");
  McqReport rep;
  for (const auto& r : records) {
    const bool ok = mcq_correct(r);
    for (AccuracyCell* cell :
         {&rep.overall, &rep.by_type[r.question_type], &rep.by_quadrant[r.quadrant]}) {
      ++cell->total;
      if (ok) ++cell->correct;
    }
  }
  return rep;
}

inline McqRecord parse_mcq_record(const nlohmann::json& j) {
  McqRecord r;
  try {
    r.question_id = j.at("id").get<std::string>();
    r.question_type = j.at("type").get<std::string>();
    r.quadrant = j.at("quadrant").get<std::string>();
    r.choices = j.at("choices").get<std::vector<std::string>>();
    r.gold = j.at("gold").get<std::string>();
    const auto& p = j.at("predicted");
    r.predicted = p.is_string() ? p.get<std::string>() : p.dump();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad MCQ record: ") + e.what());
  }
  if (std::find(kQuestionTypes.begin(), kQuestionTypes.end(), r.question_type) ==
      kQuestionTypes.end()) {
    throw DataError("unknown question type '" + r.question_type + "'");
  }
  if (std::find(kQuadrants.begin(), kQuadrants.end(), r.quadrant) == kQuadrants.end()) {
    throw DataError("unknown quadrant '" + r.quadrant + "'");
  }
  const bool gold_declared = std::any_of(r.choices.begin(), r.choices.end(), [&](const auto& c) {
    return detail::fold(c) == detail::fold(r.gold);
  });
  if (!gold_declared) {
    throw DataError("gold '" + r.gold + "' is not among the choices of " + r.question_id);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Description ratings (0/1/2 per dimension)

inline constexpr std::array<std::string_view, 3> kDescriptionDimensions = {
    "completeness", "precision", "relevance"};

struct DescriptionRating {
  std::string dimension;
  int rating = 0;
};

struct DimensionSummary {
  std::array<double, 3> frequency{};  // P0, P1, P2
  std::size_t count = 0;
  double score = 0.0;  // 0*P0 + 1*P1 + 2*P2
};

struct DescriptionReport {
  std::map<std::string, DimensionSummary> dimensions;
  double sum = 0.0;
};

inline DescriptionReport description_report(
    std::span<const DescriptionRating> ratings,
    std::span<const std::string_view> dimensions = kDescriptionDimensions) {
  std::map<std::string, std::array<std::size_t, 3>> counts;
  for (const auto& r : ratings) {
    if (r.rating < 0 || r.rating > 2) {
      throw DataError("rating " + std::to_string(r.rating) + " outside {0, 1, 2}");
    }
    ++counts[r.dimension][static_cast<std::size_t>(r.rating)];
  }
  DescriptionReport rep;
  for (auto dim : dimensions) {
    auto it = counts.find(std::string(dim));
    if (it == counts.end()) {
      throw DataError("missing dimension '" + std::string(dim) + "' in ratings");
    }
    DimensionSummary s;
    s.count = it->second[0] + it->second[1] + it->second[2];
    for (std::size_t i = 0; i < 3; ++i) {
      s.frequency[i] = static_cast<double>(it->second[i]) / static_cast<double>(s.count);
    }
    s.score = s.frequency[1] + 2.0 * s.frequency[2];
    rep.sum += s.score;
    rep.dimensions.emplace(std::string(dim), s);
  }
  return rep;
}

inline DescriptionRating parse_description_rating(const nlohmann::json& j) {
  DescriptionRating r;
  try {
    r.dimension = j.at("dimension").get<std::string>();
    r.rating = j.at("rating").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad rating record: ") + e.what());
  }
  if (std::find(kDescriptionDimensions.begin(), kDescriptionDimensions.end(), r.dimension) ==
      kDescriptionDimensions.end()) {
    throw DataError("unknown dimension '" + r.dimension + "'");
  }
  if (r.rating < 0 || r.rating > 2) {
    throw DataError("rating " + std::to_string(r.rating) + " outside {0, 1, 2}");
  }
  return r;
}

// ---------------------------------------------------------------------------
// Report rendering

inline nlohmann::ordered_json to_json(const McqReport& rep) {
  auto cell = [](const AccuracyCell& c) {
    return nlohmann::ordered_json{{"correct", c.correct}, {"total", c.total},
                                  {"accuracy", c.accuracy()}};
  };
  nlohmann::ordered_json j;
  j["overall"] = cell(rep.overall);
  j["by_type"] = nlohmann::ordered_json::object();
  for (auto t : kQuestionTypes) {
    if (auto it = rep.by_type.find(std::string(t)); it != rep.by_type.end()) {
      j["by_type"][std::string(t)] = cell(it->second);
    }
  }
  j["by_quadrant"] = nlohmann::ordered_json::object();
  for (auto q : kQuadrants) {
    if (auto it = rep.by_quadrant.find(std::string(q)); it != rep.by_quadrant.end()) {
      j["by_quadrant"][std::string(q)] = cell(it->second);
    }
  }
  return j;
}

inline std::string to_text(const McqReport& rep) {
  std::ostringstream os;
  char buf[128];
  auto row = [&](std::string_view group, std::string_view name, const AccuracyCell& c) {
    std::snprintf(buf, sizeof buf, "%-10s %-24s %7zu %7zu %9.4f\n", std::string(group).c_str(),
                  std::string(name).c_str(), c.correct, c.total, c.accuracy());
    os << buf;
  };
  std::snprintf(buf, sizeof buf, "%-10s %-24s %7s %7s %9s\n", "group", "category", "correct",
                "total", "accuracy");
  os << buf;
  for (auto t : kQuestionTypes) {
    if (auto it = rep.by_type.find(std::string(t)); it != rep.by_type.end()) row("type", t, it->second);
  }
  for (auto q : kQuadrants) {
    if (auto it = rep.by_quadrant.find(std::string(q)); it != rep.by_quadrant.end()) {
      row("quadrant", q, it->second);
    }
  }
  row("overall", "all", rep.overall);
  return os.str();
}

inline nlohmann::ordered_json to_json(const DescriptionReport& rep) {
  nlohmann::ordered_json j;
  j["dimensions"] = nlohmann::ordered_json::object();
  for (auto dim : kDescriptionDimensions) {
    auto it = rep.dimensions.find(std::string(dim));
    if (it == rep.dimensions.end()) continue;
    const auto& s = it->second;
    j["dimensions"][std::string(dim)] = {{"count", s.count},
                                         {"P0", s.frequency[0]},
                                         {"P1", s.frequency[1]},
                                         {"P2", s.frequency[2]},
                                         {"score", s.score}};
  }
  j["sum"] = rep.sum;
  return j;
}

inline std::string to_text(const DescriptionReport& rep) {
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-13s %7s %7s %7s %7s\n", "dimension", "P0", "P1", "P2", "score");
  os << buf;
  for (auto dim : kDescriptionDimensions) {
    auto it = rep.dimensions.find(std::string(dim));
    if (it == rep.dimensions.end()) continue;
    const auto& s = it->second;
    std::snprintf(buf, sizeof buf, "%-13s %7.4f %7.4f %7.4f %7.4f\n", std::string(dim).c_str(),
                  s.frequency[0], s.frequency[1], s.frequency[2], s.score);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "%-13s %31.4f\n", "sum", rep.sum);
  os << buf;
  return os.str();
}

}  // namespace qsit

#endif  // QSIT_METRICS_HPP
