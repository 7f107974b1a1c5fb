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

#ifndef QSIT_MIXOPT_HPP
#define QSIT_MIXOPT_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "qsit/datasets.hpp"
#include "qsit/error.hpp"
#include "qsit/oracle.hpp"
#include "qsit/polyfit.hpp"
#include "qsit/random.hpp"
#include "qsit/version.hpp"

namespace qsit {

// Two one-dimensional sweeps: D2 against D3, then the merged D2+D3 pool
// against D1.
enum class SweepStage { kD2VsD3 = 1, kMixedVsD1 = 2 };

inline std::string_view to_string(SweepStage s) {
  return s == SweepStage::kD2VsD3 ? "d2_vs_d3" : "mixed_vs_d1";
}

enum class AxisMode { kLog10, kFraction };

inline std::string_view to_string(AxisMode m) { return m == AxisMode::kLog10 ? "log10" : "fraction"; }

inline AxisMode parse_axis_mode(std::string_view s) {
  if (s == "log10") return AxisMode::kLog10;
  if (s == "fraction") return AxisMode::kFraction;
  throw ConfigError("unknown axis mode '" + std::string(s) + "' (expected log10 or fraction)");
}

// Component ratio (first : second) to fit-axis coordinate and back.
inline double ratio_to_axis(double ratio, AxisMode mode) {
  return mode == AxisMode::kLog10 ? std::log10(ratio) : ratio / (1.0 + ratio);
}

inline double axis_to_ratio(double t, AxisMode mode) {
  return mode == AxisMode::kLog10 ? std::pow(10.0, t) : t / (1.0 - t);
}

/// Default sweep ratios, ascending.
///
/// d2_vs_d3: the anchor pool is used whole and the other is sampled at
/// 10%, 20%, ..., 100% of it, from both sides, giving D2:D3 in
/// {0.1, ..., 1, ..., 10} with the shared 1:1 point once (19 points).
/// mixed_vs_d1: |D2+D3| : D1 in {0.1, 0.2, ..., 0.9, 1, 2, ..., 10}.
inline std::vector<double> sweep_ratios(SweepStage stage) {
  std::vector<double> r;
  if (stage == SweepStage::kD2VsD3) {
    for (int k = 1; k <= 10; ++k) r.push_back(k / 10.0);
    for (int k = 9; k >= 1; --k) r.push_back(10.0 / k);
  } else {
    for (int k = 1; k <= 10; ++k) r.push_back(k / 10.0);
    for (int k = 2; k <= 10; ++k) r.push_back(k);
  }
  std::sort(r.begin(), r.end());
  r.erase(std::unique(r.begin(), r.end()), r.end());
  return r;
}

/// Log10 grid for a stage. The d2_vs_d3 grid is built from one side and
/// mirrored so it is exactly symmetric about zero.
inline std::vector<double> build_sweep_grid(SweepStage stage) {
  std::vector<double> g;
  if (stage == SweepStage::kD2VsD3) {
    for (int k = 1; k <= 9; ++k) {
      const double t = std::log10(10.0 / k);
      g.push_back(t);
      g.push_back(-t);
    }
    g.push_back(0.0);
  } else {
    for (double r : sweep_ratios(stage)) g.push_back(std::log10(r));
  }
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

/// Relative weights of D1:D2:D3.
struct MixRatio {
  double d1 = 1.0;
  double d2 = 0.0;
  double d3 = 0.0;

  MixRatio normalized() const {
    const double s = d1 + d2 + d3;
    if (!(s > 0.0)) throw ConfigError("mix ratio has no positive weight");
    return {d1 / s, d2 / s, d3 / s};
  }
};

// D1 fixed at 1, merged pool at `mixed_to_d1`, split D2:D3 = d2_to_d3.
inline MixRatio compose_ratio(double d2_to_d3, double mixed_to_d1) {
  return {1.0, mixed_to_d1 * d2_to_d3 / (1.0 + d2_to_d3), mixed_to_d1 / (1.0 + d2_to_d3)};
}

inline std::size_t round_half_up(double x) {
  return x <= 0.0 ? 0 : static_cast<std::size_t>(std::floor(x + 0.5));
}

// Splits a merged D2+D3 count at D2:D3 = ratio; D3 takes the remainder.
inline std::pair<std::size_t, std::size_t> split_mixed(std::size_t mixed, double d2_to_d3) {
  const std::size_t d2 = std::min(mixed, round_half_up(mixed * d2_to_d3 / (1.0 + d2_to_d3)));
  return {d2, mixed - d2};
}

inline PoolCounts stage1_counts(double d2_to_d3, std::size_t n2, std::size_t n3) {
  if (d2_to_d3 >= 1.0) return {0, n2, round_half_up(n2 / d2_to_d3)};
  return {0, round_half_up(n3 * d2_to_d3), n3};
}

inline PoolCounts stage2_counts(double mixed_to_d1, double d2_to_d3, std::size_t base_d1) {
  const auto [d2, d3] = split_mixed(round_half_up(base_d1 * mixed_to_d1), d2_to_d3);
  return {base_d1, d2, d3};
}

struct PerformancePoint {
  double ratio = 1.0;             // nominal grid ratio
  double ratio_axis_value = 0.0;  // axis coordinate of the realized ratio
  PoolCounts counts{};
  int repeats = 0;
  double performance = 0.0;  // mean over repeats
  double performance_variance = 0.0;
  double perf_scoring = 0.0;
  double perf_interpreting = 0.0;
  double loss_scoring = 0.0;
  double loss_interpreting = 0.0;
};

struct SweepTask {
  double ratio = 1.0;
  PoolCounts counts{};
};

struct SweepConfig {
  std::uint64_t seed = 0;
  int repeats = 3;
  int jobs = 1;
  double scoring_weight = 0.0;  // performance = w * scoring + (1 - w) * interpreting
  AxisMode axis = AxisMode::kLog10;
  std::filesystem::path work_dir = "qsit-work";
};

struct SweepOutcome {
  std::vector<PerformancePoint> points;  // successful points, grid order
  std::vector<std::string> warnings;
  std::exception_ptr failure;
};

inline double realized_axis(SweepStage stage, const PoolCounts& c, AxisMode mode) {
  const double ratio = stage == SweepStage::kD2VsD3
                           ? static_cast<double>(c[1]) / static_cast<double>(c[2])
                           : static_cast<double>(c[1] + c[2]) / static_cast<double>(c[0]);
  return ratio_to_axis(ratio, mode);
}

/// Evaluates every task `repeats` times. Each task gets one manifest; each
/// repeat gets its own derived oracle seed. Tasks may run concurrently, and
/// results are always assembled in task order.
inline SweepOutcome run_sweep(const Oracle& oracle, SweepStage stage,
                              std::span<const SweepTask> tasks, std::span<const Pool> pools,
                              const SweepConfig& cfg) {
  if (cfg.repeats < 1) throw ConfigError("repeats must be at least 1");
  std::filesystem::create_directories(cfg.work_dir);
  const auto stage_tag = static_cast<std::uint64_t>(stage);

  std::vector<std::optional<PerformancePoint>> slots(tasks.size());
  std::vector<std::vector<std::string>> notes(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};

  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size() || abort.load()) return;
      try {
        const auto& task = tasks[i];
        PerformancePoint pt;
        pt.ratio = task.ratio;
        pt.counts = task.counts;
        pt.repeats = cfg.repeats;
        pt.ratio_axis_value = realized_axis(stage, task.counts, cfg.axis);

        Manifest m = sample_mixture(pools, task.counts, derive_seed(cfg.seed, {stage_tag, i, 0}),
                                    true);
        for (PoolTag t : kPoolTags) {
          if (m.with_replacement[static_cast<std::size_t>(t)]) {
            notes[i].push_back(std::string(to_string(stage)) + " point " + std::to_string(i) +
                               ": pool " + std::string(to_string(t)) +
                               " sampled with replacement");
          }
        }
        char name[64];
        std::snprintf(name, sizeof name, "stage%d_point%02zu.jsonl", static_cast<int>(stage), i);
        const auto manifest_path = (cfg.work_dir / name).string();
        write_manifest_file(manifest_path, m);

        std::vector<double> perf;
        for (int r = 0; r < cfg.repeats; ++r) {
          OracleRequest req{manifest_path,
                            derive_seed(cfg.seed, {stage_tag, i, static_cast<std::uint64_t>(r) + 1}),
                            {"scoring", "interpreting"}};
          const OracleResponse resp = oracle.evaluate(req);
          validate(resp);
          perf.push_back(cfg.scoring_weight * resp.perf_scoring +
                         (1.0 - cfg.scoring_weight) * resp.perf_interpreting);
          pt.perf_scoring += resp.perf_scoring;
          pt.perf_interpreting += resp.perf_interpreting;
          pt.loss_scoring += resp.loss_scoring;
          pt.loss_interpreting += resp.loss_interpreting;
        }
        const double n = cfg.repeats;
        for (double v : perf) pt.performance += v;
        pt.performance /= n;
        for (double v : perf) pt.performance_variance += (v - pt.performance) * (v - pt.performance);
        pt.performance_variance /= n;
        pt.perf_scoring /= n;
        pt.perf_interpreting /= n;
        pt.loss_scoring /= n;
        pt.loss_interpreting /= n;
        slots[i] = pt;
      } catch (...) {
        errors[i] = std::current_exception();
        abort.store(true);
      }
    }
  };

  const int workers =
      std::max(1, std::min({cfg.jobs, oracle.max_parallel(), static_cast<int>(tasks.size())}));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  SweepOutcome out;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (slots[i]) out.points.push_back(*slots[i]);
    for (auto& n : notes[i]) out.warnings.push_back(std::move(n));
    if (errors[i] && !out.failure) out.failure = errors[i];
  }
  return out;
}

inline FittedCurve fit_curve(std::span<const PerformancePoint> points) {
  std::vector<double> t, y;
  for (const auto& p : points) {
    t.push_back(p.ratio_axis_value);
    y.push_back(p.performance);
  }
  return fit_curve(t, y);
}

// Fitted maximizer in axis units, never outside the swept range.
inline double argmax_ratio(const FittedCurve& curve) { return argmax(curve); }

struct CoarseSearchConfig {
  std::uint64_t seed = 0;
  int repeats = 3;
  int jobs = 1;
  AxisMode axis = AxisMode::kLog10;
  std::vector<double> stage1_ratios = sweep_ratios(SweepStage::kD2VsD3);
  std::vector<double> stage2_ratios = sweep_ratios(SweepStage::kMixedVsD1);
  double stage1_scoring_weight = 0.0;
  double stage2_scoring_weight = 0.5;
  std::size_t base_d1 = 0;  // 0: the full D1 pool
  std::filesystem::path work_dir = "qsit-work";
  std::filesystem::path record_path;  // written on success and on failure when set
};

struct StageResult {
  std::vector<PerformancePoint> points;
  std::optional<FittedCurve> curve;
  double argmax_axis = 0.0;
  double ratio = 0.0;
  bool flat = false;
};

struct CoarseResult {
  std::string status = "complete";  // or "failed_stage1" / "failed_stage2" / "failed_confirmation"
  std::string error;
  nlohmann::ordered_json oracle;
  CoarseSearchConfig config;
  StageResult stage1;
  StageResult stage2;
  double d2_to_d3 = 0.0;
  double mixed_to_d1 = 0.0;
  MixRatio ratio;
  double lambda_loss = 0.0;
  PoolCounts confirmation_counts{};
  OracleResponse confirmation;
  std::vector<std::string> warnings;
};

namespace detail {

inline nlohmann::ordered_json counts_json(const PoolCounts& c) {
  return {{"d1", c[0]}, {"d2", c[1]}, {"d3", c[2]}};
}

inline PoolCounts counts_from_json(const nlohmann::json& j) {
  return {j.at("d1").get<std::size_t>(), j.at("d2").get<std::size_t>(),
          j.at("d3").get<std::size_t>()};
}

inline nlohmann::ordered_json stage_json(const StageResult& s, const std::vector<double>& grid,
                                         AxisMode axis) {
  nlohmann::ordered_json j;
  j["grid_ratios"] = grid;
  auto pts = nlohmann::ordered_json::array();
  for (const auto& p : s.points) {
    pts.push_back({{"ratio", p.ratio},
                   {"ratio_axis_value", p.ratio_axis_value},
                   {"counts", counts_json(p.counts)},
                   {"repeats", p.repeats},
                   {"performance", p.performance},
                   {"performance_variance", p.performance_variance},
                   {"perf_scoring", p.perf_scoring},
                   {"perf_interpreting", p.perf_interpreting},
                   {"loss_scoring", p.loss_scoring},
                   {"loss_interpreting", p.loss_interpreting}});
  }
  j["points"] = std::move(pts);
  if (s.curve) {
    j["curve"] = {{"axis", to_string(axis)},
                  {"coefficients", s.curve->coefficients},
                  {"fit_domain", {s.curve->lo, s.curve->hi}},
                  {"residual_rms", s.curve->residual_rms},
                  {"flat", s.flat}};
    j["argmax_axis"] = s.argmax_axis;
    j["ratio"] = s.ratio;
  }
  return j;
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const CoarseResult& r) {
  nlohmann::ordered_json j;
  j["kind"] = "coarse_result";
  j["tool_version"] = kVersion;
  j["status"] = r.status;
  if (!r.error.empty()) j["error"] = r.error;
  j["oracle"] = r.oracle;
  j["seed"] = r.config.seed;
  j["repeats"] = r.config.repeats;
  j["axis"] = to_string(r.config.axis);
  j["base_d1"] = r.config.base_d1;
  j["stage_weights"] = {{"stage1_scoring", r.config.stage1_scoring_weight},
                        {"stage2_scoring", r.config.stage2_scoring_weight}};
  j["stage1"] = detail::stage_json(r.stage1, r.config.stage1_ratios, r.config.axis);
  j["stage2"] = detail::stage_json(r.stage2, r.config.stage2_ratios, r.config.axis);
  if (r.status == "complete") {
    j["d2_to_d3"] = r.d2_to_d3;
    j["mixed_to_d1"] = r.mixed_to_d1;
    j["ratio"] = {{"d1", r.ratio.d1}, {"d2", r.ratio.d2}, {"d3", r.ratio.d3}};
    j["confirmation"] = {{"counts", detail::counts_json(r.confirmation_counts)},
                         {"perf_scoring", r.confirmation.perf_scoring},
                         {"perf_interpreting", r.confirmation.perf_interpreting},
                         {"loss_scoring", r.confirmation.loss_scoring},
                         {"loss_interpreting", r.confirmation.loss_interpreting}};
    j["lambda_loss"] = r.lambda_loss;
  }
  j["warnings"] = r.warnings;
  return j;
}

/// The fields the fine-grained controller needs from a coarse run.
struct CoarseSummary {
  double d2_to_d3 = 1.0;
  double mixed_to_d1 = 1.0;
  double lambda_loss = 1.0;
  std::size_t base_d1 = 0;
};

inline CoarseSummary coarse_summary_from_json(const nlohmann::json& j) {
  try {
    if (j.at("status").get<std::string>() != "complete") {
      throw DataError("coarse result is incomplete (status " + j["status"].get<std::string>() + ")");
    }
    CoarseSummary s;
    s.d2_to_d3 = j.at("d2_to_d3").get<double>();
    s.mixed_to_d1 = j.at("mixed_to_d1").get<double>();
    s.lambda_loss = j.at("lambda_loss").get<double>();
    s.base_d1 = j.at("confirmation").at("counts").at("d1").get<std::size_t>();
    if (!(s.lambda_loss > 0.0) || !(s.d2_to_d3 > 0.0) || !(s.mixed_to_d1 > 0.0)) {
      throw DataError("coarse result holds non-positive ratios");
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed coarse result: ") + e.what());
  }
}

namespace detail {

inline void persist(const CoarseResult& r) {
  if (r.config.record_path.empty()) return;
  if (r.config.record_path.has_parent_path()) {
    std::filesystem::create_directories(r.config.record_path.parent_path());
  }
  std::ofstream out(r.config.record_path, std::ios::binary);
  if (!out) throw DataError("cannot write coarse result '" + r.config.record_path.string() + "'");
  out << to_json(r).dump(2) << '\n';
}

inline std::string describe_exception(std::exception_ptr p) {
  try {
    std::rethrow_exception(p);
  } catch (const std::exception& e) {
    return e.what();
  } catch (...) {
    return "unknown error";
  }
}

inline StageResult finish_stage(SweepOutcome&& outcome, SweepStage stage, CoarseResult& result) {
  StageResult s;
  s.points = std::move(outcome.points);
  for (auto& w : outcome.warnings) result.warnings.push_back(std::move(w));
  if (outcome.failure) {
    result.status = stage == SweepStage::kD2VsD3 ? "failed_stage1" : "failed_stage2";
    result.error = describe_exception(outcome.failure);
    (stage == SweepStage::kD2VsD3 ? result.stage1 : result.stage2) = s;
    persist(result);
    std::rethrow_exception(outcome.failure);
  }
  s.curve = fit_curve(std::span<const PerformancePoint>(s.points));
  s.flat = is_flat(*s.curve);
  s.argmax_axis = argmax_ratio(*s.curve);
  s.ratio = axis_to_ratio(s.argmax_axis, result.config.axis);
  if (s.flat) {
    result.warnings.push_back(std::string(to_string(stage)) +
                              ": fitted curve is flat; ratio chosen by tie-break");
  }
  return s;
}

inline const Pool& find_pool(std::span<const Pool> pools, PoolTag tag) {
  for (const auto& p : pools) {
    if (p.tag == tag) return p;
  }
  throw ConfigError("pool " + std::string(to_string(tag)) + " is not loaded");
}

}  // namespace detail

/// Coarse mixture search: sweep D2:D3, fit and maximize, merge at the
/// optimum, sweep the merged pool against D1, fit and maximize, then one
/// confirmation run at the composed ratio records the reference loss ratio
/// L_S / L_I.
inline CoarseResult coarse_search(const Oracle& oracle, std::span<const Pool> pools,
                                  const CoarseSearchConfig& cfg) {
  CoarseResult result;
  result.config = cfg;
  result.oracle = oracle.describe();

  const Pool& d1 = detail::find_pool(pools, PoolTag::kD1);
  const Pool& d2 = detail::find_pool(pools, PoolTag::kD2);
  const Pool& d3 = detail::find_pool(pools, PoolTag::kD3);
  if (d2.size() == 0 || d3.size() == 0) throw DataError("D2 and D3 pools must be non-empty");
  const std::size_t base = cfg.base_d1 ? cfg.base_d1 : d1.size();
  if (base == 0) throw DataError("D1 pool is empty and no base count is configured");
  result.config.base_d1 = base;

  auto sorted_unique = [](std::vector<double> v) {
    for (double r : v) {
      if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("sweep ratios must be positive");
    }
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  };
  result.config.stage1_ratios = sorted_unique(cfg.stage1_ratios);
  result.config.stage2_ratios = sorted_unique(cfg.stage2_ratios);

  SweepConfig sc{cfg.seed, cfg.repeats, cfg.jobs, cfg.stage1_scoring_weight, cfg.axis, cfg.work_dir};

  std::vector<SweepTask> tasks1;
  for (double r : result.config.stage1_ratios) {
    tasks1.push_back({r, stage1_counts(r, d2.size(), d3.size())});
  }
  for (const auto& t : tasks1) {
    if (t.counts[1] == 0 || t.counts[2] == 0) {
      throw ConfigError("stage-1 ratio " + std::to_string(t.ratio) + " rounds a pool to zero");
    }
  }
  result.stage1 = detail::finish_stage(
      run_sweep(oracle, SweepStage::kD2VsD3, tasks1, pools, sc), SweepStage::kD2VsD3, result);
  result.d2_to_d3 = result.stage1.ratio;

  std::vector<SweepTask> tasks2;
  for (double g : result.config.stage2_ratios) {
    tasks2.push_back({g, stage2_counts(g, result.d2_to_d3, base)});
  }
  sc.scoring_weight = cfg.stage2_scoring_weight;
  result.stage2 = detail::finish_stage(
      run_sweep(oracle, SweepStage::kMixedVsD1, tasks2, pools, sc), SweepStage::kMixedVsD1,
      result);
  result.mixed_to_d1 = result.stage2.ratio;
  result.ratio = compose_ratio(result.d2_to_d3, result.mixed_to_d1);

  try {
    result.confirmation_counts = stage2_counts(result.mixed_to_d1, result.d2_to_d3, base);
    Manifest m = sample_mixture(pools, result.confirmation_counts,
                                derive_seed(cfg.seed, "confirmation-manifest"), true);
    const auto path = (cfg.work_dir / "confirmation.jsonl").string();
    write_manifest_file(path, m);
    result.confirmation =
        oracle.evaluate({path, derive_seed(cfg.seed, "confirmation"), {"scoring", "interpreting"}});
    validate(result.confirmation);
    result.lambda_loss = result.confirmation.loss_scoring / result.confirmation.loss_interpreting;
  } catch (const std::exception& e) {
    result.status = "failed_confirmation";
    result.error = e.what();
    detail::persist(result);
    throw;
  }
  detail::persist(result);
  return result;
}

}  // namespace qsit

#endif  // QSIT_MIXOPT_HPP
