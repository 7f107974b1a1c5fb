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

#ifndef QSIT_ORACLE_HPP
#define QSIT_ORACLE_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <semaphore>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "qsit/datasets.hpp"
#include "qsit/error.hpp"
#include "qsit/random.hpp"

extern char** environ;

namespace qsit {

struct OracleRequest {
  std::string manifest_path;
  std::uint64_t seed = 0;
  std::vector<std::string> validation_tags{"scoring", "interpreting"};
};

struct OracleResponse {
  double perf_scoring = 0.0;       // mean (SRCC+PLCC)/2 over IQA validation sets
  double perf_interpreting = 0.0;  // validation MCQ accuracy
  double loss_scoring = 1.0;
  double loss_interpreting = 1.0;

  friend bool operator==(const OracleResponse&, const OracleResponse&) = default;
};

// Throws OracleResultError naming the first field outside its range.
inline void validate(const OracleResponse& r) {
  auto bad = [](const char* field, double v, const char* range) {
    std::ostringstream os;
    os << field << " = " << v << " outside " << range;
    throw OracleResultError(os.str());
  };
  if (!(r.perf_scoring >= -1.0 && r.perf_scoring <= 1.0)) bad("perf_scoring", r.perf_scoring, "[-1, 1]");
  if (!(r.perf_interpreting >= 0.0 && r.perf_interpreting <= 1.0)) {
    bad("perf_interpreting", r.perf_interpreting, "[0, 1]");
  }
  if (!(r.loss_scoring > 0.0) || !std::isfinite(r.loss_scoring)) bad("loss_scoring", r.loss_scoring, "(0, inf)");
  if (!(r.loss_interpreting > 0.0) || !std::isfinite(r.loss_interpreting)) {
    bad("loss_interpreting", r.loss_interpreting, "(0, inf)");
  }
}

/// Train-and-evaluate boundary: a manifest and a seed in, validation
/// performances and losses out.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual OracleResponse evaluate(const OracleRequest& req) const = 0;
  // Identifies the oracle in run records.
  virtual nlohmann::ordered_json describe() const = 0;
  // Upper bound on concurrent evaluate() calls the caller should issue.
  virtual int max_parallel() const { return 1; }
};

// ---------------------------------------------------------------------------
// Synthetic oracle

/// peak - curvature * d^2 - quartic * d^4 with d = t - peak_log10.
struct Surface {
  double peak_log10 = 0.0;
  double peak_value = 0.8;
  double curvature = 0.2;
  double quartic = 0.0;

  double operator()(double t) const {
    const double d = t - peak_log10;
    return peak_value - curvature * d * d - quartic * d * d * d * d;
  }
};

/// Loss model: L_S = scoring_coef * n1^-alpha and
/// L_I = interpreting_coef * (n2 + n3)^-alpha.
struct LossModel {
  double alpha = 0.5;
  double scoring_coef = 1.0;
  double interpreting_coef = 1.0;
};

struct SurfaceConfig {
  Surface interpreting{std::log10(2.42), 0.95, 0.49, 0.0};  // over log10(n2 / n3)
  Surface scoring{std::log10(3.54), 0.9, 0.75, 0.0};        // over log10((n2 + n3) / n1)
  double noise_sigma = 0.0;
  double undefined_value = 0.0;  // performance when the axis has an empty side
  LossModel loss;
};

/// Deterministic stand-in for training: reads the manifest's per-pool
/// counts and evaluates the configured surfaces at the realized ratios.
class SyntheticOracle final : public Oracle {
 public:
  explicit SyntheticOracle(SurfaceConfig cfg) : cfg_(cfg) {}

  const SurfaceConfig& config() const { return cfg_; }

  OracleResponse evaluate_counts(const PoolCounts& c, std::uint64_t seed) const {
    const double n1 = static_cast<double>(c[0]);
    const double n2 = static_cast<double>(c[1]);
    const double n3 = static_cast<double>(c[2]);
    OracleResponse r;
    r.perf_interpreting = (n2 > 0 && n3 > 0) ? cfg_.interpreting(std::log10(n2 / n3))
                                             : cfg_.undefined_value;
    r.perf_scoring = (n1 > 0 && n2 + n3 > 0) ? cfg_.scoring(std::log10((n2 + n3) / n1))
                                             : cfg_.undefined_value;
    if (cfg_.noise_sigma > 0.0) {
      Rng rng(derive_seed(seed, "synthetic-noise"));
      r.perf_scoring += cfg_.noise_sigma * rng.normal();
      r.perf_interpreting += cfg_.noise_sigma * rng.normal();
    }
    r.perf_scoring = std::clamp(r.perf_scoring, -1.0, 1.0);
    r.perf_interpreting = std::clamp(r.perf_interpreting, 0.0, 1.0);
    r.loss_scoring = cfg_.loss.scoring_coef * std::pow(std::max(n1, 1.0), -cfg_.loss.alpha);
    r.loss_interpreting =
        cfg_.loss.interpreting_coef * std::pow(std::max(n2 + n3, 1.0), -cfg_.loss.alpha);
    return r;
  }

  OracleResponse evaluate(const OracleRequest& req) const override {
    const auto summary = read_manifest_summary(req.manifest_path);
    return evaluate_counts(summary.counts, req.seed);
  }

  nlohmann::ordered_json describe() const override {
    auto surface = [](const Surface& s) {
      return nlohmann::ordered_json{{"peak_log10", s.peak_log10},
                                    {"peak_value", s.peak_value},
                                    {"curvature", s.curvature},
                                    {"quartic", s.quartic}};
    };
    return {{"kind", "synthetic"},
            {"interpreting", surface(cfg_.interpreting)},
            {"scoring", surface(cfg_.scoring)},
            {"noise_sigma", cfg_.noise_sigma},
            {"loss",
             {{"alpha", cfg_.loss.alpha},
              {"scoring_coef", cfg_.loss.scoring_coef},
              {"interpreting_coef", cfg_.loss.interpreting_coef}}}};
  }

  int max_parallel() const override { return 1 << 20; }

 private:
  SurfaceConfig cfg_;
};

// ---------------------------------------------------------------------------
// External command oracle

struct CommandConfig {
  // Shell command; {manifest}, {seed} and {out} are replaced by shell-quoted values.
  std::string command;
  // Result file path; may use {manifest} and {seed}. Empty: "<manifest>.result.json".
  std::string result_path;
  double timeout_seconds = 0.0;  // 0 disables the timeout
  int max_parallel = 1;
  std::map<std::string, std::string> env;  // added to the inherited environment
};

inline std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

inline std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

inline OracleResponse parse_oracle_result(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw OracleResultError(std::string("result file is not valid JSON: ") + e.what());
  }
  OracleResponse r;
  auto field = [&](const char* key) {
    if (!j.is_object() || !j.contains(key) || !j[key].is_number()) {
      throw OracleResultError(std::string("result file lacks numeric '") + key + "'");
    }
    return j[key].get<double>();
  };
  r.perf_scoring = field("perf_scoring");
  r.perf_interpreting = field("perf_interpreting");
  r.loss_scoring = field("loss_scoring");
  r.loss_interpreting = field("loss_interpreting");
  validate(r);
  return r;
}

class ExternalOracle final : public Oracle {
 public:
  explicit ExternalOracle(CommandConfig cfg)
      : cfg_(std::move(cfg)),
        slots_(std::make_unique<std::counting_semaphore<>>(std::max(1, cfg_.max_parallel))) {
    if (cfg_.command.empty()) throw ConfigError("external oracle needs a command");
  }

  std::string result_path_for(const OracleRequest& req) const {
    if (cfg_.result_path.empty()) return req.manifest_path + ".result.json";
    return replace_all(replace_all(cfg_.result_path, "{manifest}", req.manifest_path), "{seed}",
                       std::to_string(req.seed));
  }

  std::string render(const OracleRequest& req) const {
    std::string cmd = cfg_.command;
    cmd = replace_all(cmd, "{manifest}", shell_quote(req.manifest_path));
    cmd = replace_all(cmd, "{seed}", std::to_string(req.seed));
    cmd = replace_all(cmd, "{out}", shell_quote(result_path_for(req)));
    return cmd;
  }

  OracleResponse evaluate(const OracleRequest& req) const override {
    if (!std::filesystem::exists(req.manifest_path)) {
      throw OracleError("manifest '" + req.manifest_path + "' does not exist");
    }
    slots_->acquire();
    struct Release {
      std::counting_semaphore<>* s;
      ~Release() { s->release(); }
    } release{slots_.get()};

    const std::string out_path = result_path_for(req);
    std::error_code ec;
    std::filesystem::remove(out_path, ec);
    run(render(req));

    std::ifstream in(out_path, std::ios::binary);
    if (!in) throw OracleResultError("command finished but wrote no result file '" + out_path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
      return parse_oracle_result(buf.str());
    } catch (const OracleResultError& e) {
      throw OracleResultError(out_path + ": " + e.what());
    }
  }

  nlohmann::ordered_json describe() const override {
    return {{"kind", "external"},
            {"command", cfg_.command},
            {"result_path", cfg_.result_path},
            {"timeout_seconds", cfg_.timeout_seconds},
            {"max_parallel", cfg_.max_parallel}};
  }

  int max_parallel() const override { return std::max(1, cfg_.max_parallel); }

 private:
  // Runs `sh -c cmd` in its own process group with stdout+stderr captured.
  void run(const std::string& cmd) const {
    char log_template[] = "/tmp/qsit-oracle-XXXXXX";
    const int log_fd = mkstemp(log_template);
    if (log_fd < 0) throw OracleError("cannot create capture file for oracle output");
    const std::string log_path = log_template;

    std::vector<std::string> env_store;
    for (char** e = environ; *e != nullptr; ++e) env_store.emplace_back(*e);
    for (const auto& [k, v] : cfg_.env) env_store.push_back(k + "=" + v);
    std::vector<char*> envp;
    for (auto& s : env_store) envp.push_back(s.data());
    envp.push_back(nullptr);

    const pid_t pid = fork();
    if (pid < 0) {
      close(log_fd);
      std::remove(log_path.c_str());
      throw OracleError("fork failed");
    }
    if (pid == 0) {
      setpgid(0, 0);
      dup2(log_fd, STDOUT_FILENO);
      dup2(log_fd, STDERR_FILENO);
      close(log_fd);
      const char* argv[] = {"/bin/sh", "-c", cmd.c_str(), nullptr};
      execve("/bin/sh", const_cast<char* const*>(argv), envp.data());
      _exit(127);
    }
    close(log_fd);

    const auto start = std::chrono::steady_clock::now();
    int status = 0;
    bool timed_out = false;
    for (;;) {
      const pid_t w = waitpid(pid, &status, WNOHANG);
      if (w == pid) break;
      if (w < 0) break;
      if (cfg_.timeout_seconds > 0.0 &&
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() >
              cfg_.timeout_seconds) {
        kill(-pid, SIGKILL);
        waitpid(pid, &status, 0);
        timed_out = true;
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }

    std::ifstream log(log_path, std::ios::binary);
    std::stringstream captured;
    captured << log.rdbuf();
    std::remove(log_path.c_str());

    if (timed_out) {
      throw OracleTimeoutError("oracle command exceeded " + std::to_string(cfg_.timeout_seconds) +
                                   " s timeout",
                               captured.str());
    }
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
    if (code != 0) {
      throw OracleExecutionError("oracle command exited with status " + std::to_string(code) +
                                     ": " + captured.str(),
                                 code, captured.str());
    }
  }

  CommandConfig cfg_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
};

}  // namespace qsit

#endif  // QSIT_ORACLE_HPP
