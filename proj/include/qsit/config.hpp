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

#ifndef QSIT_CONFIG_HPP
#define QSIT_CONFIG_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "qsit/controller.hpp"
#include "qsit/datasets.hpp"
#include "qsit/error.hpp"
#include "qsit/mixopt.hpp"
#include "qsit/oracle.hpp"

namespace qsit {

// Pipeline configuration as read from a YAML document. Every key is
// optional; command-line flags override whatever is set here.
struct PipelineConfig {
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<int> repeats;
  std::optional<std::string> work_dir;
  std::array<std::string, 3> pool_paths;  // D1, D2, D3

  std::string oracle_kind = "synthetic";
  SurfaceConfig synthetic;
  CommandConfig external;

  AxisMode axis = AxisMode::kLog10;
  std::optional<std::vector<double>> stage1_ratios;
  std::optional<std::vector<double>> stage2_ratios;
  double stage1_scoring_weight = 0.0;
  double stage2_scoring_weight = 0.5;
  std::size_t base_d1 = 0;

  int max_epochs = 3;
  double tolerance = 0.1;
  double factor = 1.1;
};

namespace detail {

template <typename T>
T yaml_get(const YAML::Node& node, const char* key, T fallback) {
  const auto v = node[key];
  if (!v) return fallback;
  try {
    return v.as<T>();
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

inline Surface read_surface(const YAML::Node& n, Surface s) {
  if (!n) return s;
  if (n["peak_ratio"]) {
    const double r = yaml_get<double>(n, "peak_ratio", 1.0);
    if (!(r > 0.0)) throw ConfigError("surface peak_ratio must be positive");
    s.peak_log10 = std::log10(r);
  }
  s.peak_log10 = yaml_get(n, "peak_log10", s.peak_log10);
  s.peak_value = yaml_get(n, "peak_value", s.peak_value);
  s.curvature = yaml_get(n, "curvature", s.curvature);
  s.quartic = yaml_get(n, "quartic", s.quartic);
  return s;
}

}  // namespace detail

inline PipelineConfig parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  PipelineConfig c;
  if (!root || root.IsNull()) return c;
  if (!root.IsMap()) throw ConfigError("config root must be a mapping");

  if (root["seed"]) c.seed = detail::yaml_get<std::uint64_t>(root, "seed", 0);
  if (root["jobs"]) c.jobs = detail::yaml_get<int>(root, "jobs", 1);
  if (root["repeats"]) c.repeats = detail::yaml_get<int>(root, "repeats", 3);
  if (root["work_dir"]) c.work_dir = detail::yaml_get<std::string>(root, "work_dir", "");

  if (const auto pools = root["pools"]) {
    c.pool_paths[0] = detail::yaml_get<std::string>(pools, "d1", "");
    c.pool_paths[1] = detail::yaml_get<std::string>(pools, "d2", "");
    c.pool_paths[2] = detail::yaml_get<std::string>(pools, "d3", "");
  }

  if (const auto o = root["oracle"]) {
    c.oracle_kind = detail::yaml_get<std::string>(o, "kind", c.oracle_kind);
    if (const auto s = o["synthetic"]) {
      c.synthetic.interpreting = detail::read_surface(s["interpreting"], c.synthetic.interpreting);
      c.synthetic.scoring = detail::read_surface(s["scoring"], c.synthetic.scoring);
      c.synthetic.noise_sigma = detail::yaml_get(s, "noise_sigma", c.synthetic.noise_sigma);
      if (const auto l = s["loss"]) {
        c.synthetic.loss.alpha = detail::yaml_get(l, "alpha", c.synthetic.loss.alpha);
        c.synthetic.loss.scoring_coef = detail::yaml_get(l, "scoring_coef", c.synthetic.loss.scoring_coef);
        c.synthetic.loss.interpreting_coef =
            detail::yaml_get(l, "interpreting_coef", c.synthetic.loss.interpreting_coef);
      }
    }
    if (const auto e = o["external"]) {
      c.external.command = detail::yaml_get<std::string>(e, "command", "");
      c.external.result_path = detail::yaml_get<std::string>(e, "result", "");
      c.external.timeout_seconds = detail::yaml_get(e, "timeout_seconds", 0.0);
      c.external.max_parallel = detail::yaml_get(e, "max_parallel", 1);
      if (const auto env = e["env"]) {
        for (const auto& kv : env) {
          c.external.env[kv.first.as<std::string>()] = kv.second.as<std::string>();
        }
      }
    }
  }

  if (const auto s = root["search"]) {
    c.axis = parse_axis_mode(detail::yaml_get<std::string>(s, "axis", "log10"));
    if (s["stage1_ratios"]) c.stage1_ratios = detail::yaml_get<std::vector<double>>(s, "stage1_ratios", {});
    if (s["stage2_ratios"]) c.stage2_ratios = detail::yaml_get<std::vector<double>>(s, "stage2_ratios", {});
    c.stage1_scoring_weight = detail::yaml_get(s, "stage1_scoring_weight", c.stage1_scoring_weight);
    c.stage2_scoring_weight = detail::yaml_get(s, "stage2_scoring_weight", c.stage2_scoring_weight);
    c.base_d1 = detail::yaml_get<std::size_t>(s, "base_d1", 0);
  }

  if (const auto k = root["controller"]) {
    c.max_epochs = detail::yaml_get(k, "max_epochs", c.max_epochs);
    c.tolerance = detail::yaml_get(k, "tolerance", c.tolerance);
    c.factor = detail::yaml_get(k, "factor", c.factor);
  }

  for (double w : {c.stage1_scoring_weight, c.stage2_scoring_weight}) {
    if (!(w >= 0.0 && w <= 1.0)) throw ConfigError("scoring weights must lie in [0, 1]");
  }
  if (c.oracle_kind != "synthetic" && c.oracle_kind != "external") {
    throw ConfigError("oracle kind must be 'synthetic' or 'external', got '" + c.oracle_kind + "'");
  }
  return c;
}

inline std::string read_text_file(const std::filesystem::path& path, ErrorKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    const std::string msg = "cannot read '" + path.string() + "'";
    if (kind == ErrorKind::kConfig) throw ConfigError(msg);
    throw DataError(msg);
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_text_file(path, ErrorKind::kConfig));
}

inline std::unique_ptr<Oracle> make_oracle(const PipelineConfig& c) {
  if (c.oracle_kind == "external") return std::make_unique<ExternalOracle>(c.external);
  return std::make_unique<SyntheticOracle>(c.synthetic);
}

inline Pool load_pool_file(PoolTag tag, const std::string& path) {
  if (path.empty()) throw ConfigError("no path configured for pool " + std::string(to_string(tag)));
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open pool file '" + path + "'");
  return Pool::from_load(tag, load_pool(in, tag), path);
}

}  // namespace qsit

#endif  // QSIT_CONFIG_HPP
