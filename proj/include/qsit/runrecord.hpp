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

#ifndef QSIT_RUNRECORD_HPP
#define QSIT_RUNRECORD_HPP

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "qsit/error.hpp"
#include "qsit/version.hpp"

namespace qsit {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (ctx_ == nullptr || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
      throw std::runtime_error("SHA-256 init failed");
    }
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(std::string_view bytes) { EVP_DigestUpdate(ctx_, bytes.data(), bytes.size()); }

  // Length-prefixed so that ("ab", "c") and ("a", "bc") hash differently.
  void update_field(std::string_view bytes) {
    const std::string len = std::to_string(bytes.size()) + ":";
    update(len);
    update(bytes);
  }

  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int n = 0;
    EVP_DigestFinal_ex(ctx_, md, &n);
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < n; ++i) {
      out += digits[md[i] >> 4];
      out += digits[md[i] & 0xf];
    }
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

/// Digest over the command, its effective settings, and the bytes of every
/// input file.
inline std::string config_hash(const std::string& command, const std::vector<std::string>& settings,
                               const std::vector<std::string>& input_files) {
  Sha256 h;
  h.update_field(command);
  for (const auto& s : settings) h.update_field(s);
  for (const auto& path : input_files) {
    h.update_field(path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read input '" + path + "' for hashing");
    std::string content{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    h.update_field(content);
  }
  return h.hex();
}

// Wall-clock time, or SOURCE_DATE_EPOCH when set (reproducible runs).
inline std::string timestamp_now() {
  std::time_t t;
  if (const char* sde = std::getenv("SOURCE_DATE_EPOCH"); sde != nullptr && *sde != '\0') {
    t = static_cast<std::time_t>(std::strtoll(sde, nullptr, 10));
  } else {
    t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunRecord {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string tool_version = kVersion;
  std::vector<std::string> outputs;
  std::string started;
  std::string finished;
};

inline nlohmann::ordered_json to_json(const RunRecord& r) {
  return {{"command", r.command},
          {"config_hash", r.config_hash},
          {"seed", r.seed},
          {"tool_version", r.tool_version},
          {"outputs", r.outputs},
          {"timestamps", {{"started", r.started}, {"finished", r.finished}}}};
}

inline std::string run_record_path(const std::string& primary_output) {
  return primary_output + ".run.json";
}

inline void write_run_record(const RunRecord& r, const std::string& primary_output) {
  std::ofstream out(run_record_path(primary_output), std::ios::binary);
  if (!out) throw DataError("cannot write run record for '" + primary_output + "'");
  out << to_json(r).dump(2) << '\n';
}

}  // namespace qsit

#endif  // QSIT_RUNRECORD_HPP
