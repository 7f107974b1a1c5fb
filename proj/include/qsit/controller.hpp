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

#ifndef QSIT_CONTROLLER_HPP
#define QSIT_CONTROLLER_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsit/datasets.hpp"
#include "qsit/error.hpp"
#include "qsit/mixopt.hpp"
#include "qsit/oracle.hpp"
#include "qsit/random.hpp"
#include "qsit/version.hpp"

namespace qsit {

struct EpochObservation {
  int epoch = 1;
  double loss_scoring = 1.0;
  double loss_interpreting = 1.0;
};

enum class Action { kIncreaseInterpreting, kIncreaseScoring, kHold };

inline std::string_view to_string(Action a) {
  switch (a) {
    case Action::kIncreaseInterpreting: return "increase_interpreting";
    case Action::kIncreaseScoring: return "increase_scoring";
    case Action::kHold: return "hold";
  }
  return "?";
}

struct AdjustmentDecision {
  Action action = Action::kHold;
  double factor = 1.0;
  double loss_ratio = 0.0;
  PoolCounts new_counts{};
};

struct ControlParams {
  double lambda_loss = 1.0;  // reference L_S / L_I
  double tolerance = 0.1;    // relative half-width of the hold band
  double factor = 1.1;       // multiplicative increase
  double d2_to_d3 = 1.0;     // split for interpreting increases
};

inline void validate(const ControlParams& p) {
  if (!(p.lambda_loss > 0.0) || !std::isfinite(p.lambda_loss)) {
    throw ConfigError("reference loss ratio must be positive");
  }
  if (!(p.tolerance >= 0.0 && p.tolerance < 1.0)) throw ConfigError("tolerance must lie in [0, 1)");
  if (!(p.factor > 1.0) || !std::isfinite(p.factor)) throw ConfigError("increase factor must exceed 1");
  if (!(p.d2_to_d3 > 0.0)) throw ConfigError("D2:D3 split ratio must be positive");
}

/// One control step. rho = L_S / L_I below lambda*(1 - tol) grows D2+D3 by
/// `factor` (re-split at d2_to_d3); above lambda*(1 + tol) grows D1; inside
/// the band nothing changes. Counts never shrink.
inline AdjustmentDecision decide(const EpochObservation& obs, const ControlParams& p,
                                 const PoolCounts& current) {
  validate(p);
  if (!(obs.loss_scoring > 0.0) || !(obs.loss_interpreting > 0.0)) {
    throw DataError("epoch " + std::to_string(obs.epoch) + ": losses must be positive");
  }
  AdjustmentDecision d;
  d.loss_ratio = obs.loss_scoring / obs.loss_interpreting;
  d.new_counts = current;
  if (d.loss_ratio < p.lambda_loss * (1.0 - p.tolerance)) {
    d.action = Action::kIncreaseInterpreting;
    d.factor = p.factor;
    const std::size_t mixed = round_half_up(static_cast<double>(current[1] + current[2]) * p.factor);
    auto [d2, d3] = split_mixed(mixed, p.d2_to_d3);
    if (d2 < current[1]) {
      d2 = current[1];
      d3 = mixed - d2;
    } else if (d3 < current[2]) {
      d3 = current[2];
      d2 = mixed - d3;
    }
    d.new_counts[1] = d2;
    d.new_counts[2] = d3;
  } else if (d.loss_ratio > p.lambda_loss * (1.0 + p.tolerance)) {
    d.action = Action::kIncreaseScoring;
    d.factor = p.factor;
    d.new_counts[0] = round_half_up(static_cast<double>(current[0]) * p.factor);
  }
  return d;
}

struct ControllerConfig {
  std::uint64_t seed = 0;
  int max_epochs = 3;
  double tolerance = 0.1;
  double factor = 1.1;
  std::size_t base_d1 = 0;  // 0: take it from the coarse result
  std::filesystem::path work_dir = "qsit-work";
  std::filesystem::path trajectory_path;  // appended to as epochs finish when set
  std::string coarse_reference;           // recorded in the header
};

struct EpochRecord {
  int epoch = 1;
  PoolCounts counts{};
  OracleResponse response;
  AdjustmentDecision decision;
  bool oversampled = false;
};

struct Trajectory {
  nlohmann::ordered_json header;
  std::vector<EpochRecord> epochs;
  std::vector<std::string> warnings;
  std::string error;  // set when the oracle failed mid-run
};

inline nlohmann::ordered_json to_json(const EpochRecord& e) {
  nlohmann::ordered_json j;
  j["epoch"] = e.epoch;
  j["counts"] = {{"d1", e.counts[0]}, {"d2", e.counts[1]}, {"d3", e.counts[2]}};
  j["losses"] = {{"scoring", e.response.loss_scoring},
                 {"interpreting", e.response.loss_interpreting}};
  j["ratio"] = e.decision.loss_ratio;
  j["action"] = to_string(e.decision.action);
  j["next_counts"] = {{"d1", e.decision.new_counts[0]},
                      {"d2", e.decision.new_counts[1]},
                      {"d3", e.decision.new_counts[2]}};
  j["perf"] = {{"scoring", e.response.perf_scoring},
               {"interpreting", e.response.perf_interpreting}};
  j["oversampled"] = e.oversampled;
  return j;
}

/// Fine-grained loop. Epoch 1 trains at the coarse ratio; every epoch's
/// losses feed decide(), whose counts are used by the next epoch. Stops at
/// max_epochs or after two consecutive holds.
inline Trajectory run_loop(const Oracle& oracle, const CoarseSummary& coarse,
                           std::span<const Pool> pools, const ControllerConfig& cfg) {
  if (cfg.max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
  const ControlParams params{coarse.lambda_loss, cfg.tolerance, cfg.factor, coarse.d2_to_d3};
  validate(params);
  const std::size_t base = cfg.base_d1 ? cfg.base_d1 : coarse.base_d1;
  if (base == 0) throw ConfigError("no D1 base count: set base_d1");

  Trajectory traj;
  traj.header = {{"kind", "trajectory"},
                 {"tool_version", kVersion},
                 {"lambda_loss", params.lambda_loss},
                 {"tolerance", params.tolerance},
                 {"factor", params.factor},
                 {"seed", cfg.seed},
                 {"max_epochs", cfg.max_epochs},
                 {"d2_to_d3", coarse.d2_to_d3},
                 {"mixed_to_d1", coarse.mixed_to_d1},
                 {"coarse_result", cfg.coarse_reference},
                 {"oracle", oracle.describe()}};

  std::optional<std::ofstream> log;
  if (!cfg.trajectory_path.empty()) {
    if (cfg.trajectory_path.has_parent_path()) {
      std::filesystem::create_directories(cfg.trajectory_path.parent_path());
    }
    log.emplace(cfg.trajectory_path, std::ios::binary | std::ios::trunc);
    if (!*log) throw DataError("cannot write trajectory '" + cfg.trajectory_path.string() + "'");
    *log << traj.header.dump() << '\n' << std::flush;
  }
  std::filesystem::create_directories(cfg.work_dir);

  PoolCounts counts = stage2_counts(coarse.mixed_to_d1, coarse.d2_to_d3, base);
  int consecutive_holds = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.counts = counts;
    try {
      const auto ep = static_cast<std::uint64_t>(epoch);
      Manifest m = sample_mixture(pools, counts, derive_seed(cfg.seed, {ep, 0}), true);
      for (PoolTag t : kPoolTags) {
        if (m.with_replacement[static_cast<std::size_t>(t)]) {
          rec.oversampled = true;
          traj.warnings.push_back("epoch " + std::to_string(epoch) + ": pool " +
                                  std::string(to_string(t)) +
                                  " exhausted, sampled with replacement");
        }
      }
      const auto path = (cfg.work_dir / ("epoch_" + std::to_string(epoch) + ".jsonl")).string();
      write_manifest_file(path, m);
      rec.response = oracle.evaluate({path, derive_seed(cfg.seed, {ep, 1}), {"scoring", "interpreting"}});
      validate(rec.response);
    } catch (const std::exception& e) {
      traj.error = "epoch " + std::to_string(epoch) + ": " + e.what();
      if (log) {
        *log << nlohmann::ordered_json{{"epoch", epoch}, {"error", e.what()}}.dump() << '\n'
             << std::flush;
      }
      throw;
    }
    rec.decision = decide({epoch, rec.response.loss_scoring, rec.response.loss_interpreting},
                          params, counts);
    traj.epochs.push_back(rec);
    if (log) *log << to_json(rec).dump() << '\n' << std::flush;

    consecutive_holds = rec.decision.action == Action::kHold ? consecutive_holds + 1 : 0;
    if (consecutive_holds >= 2) break;
    counts = rec.decision.new_counts;
  }
  return traj;
}

}  // namespace qsit

#endif  // QSIT_CONTROLLER_HPP
