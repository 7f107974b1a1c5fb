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

#ifndef QSIT_ERROR_HPP
#define QSIT_ERROR_HPP

#include <stdexcept>
#include <string>

namespace qsit {

// Error categories double as the CLI exit-code contract.
enum class ErrorKind : int {
  kData = 1,
  kConfig = 2,
  kOracle = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

struct OutOfRangeError : DataError {
  OutOfRangeError(const std::string& what, double value)
      : DataError(what), value(value) {}
  double value;
};

struct NormalizationError : DataError {
  NormalizationError(const std::string& what, double sum)
      : DataError(what), sum(sum) {}
  double sum;
};

struct MalformedLogitsError : DataError {
  using DataError::DataError;
};

struct DegenerateSampleError : DataError {
  using DataError::DataError;
};

struct ParseError : DataError {
  ParseError(const std::string& what, std::size_t line)
      : DataError(what), line(line) {}
  std::size_t line;  // 1-based; 0 when not tied to a line
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

struct OracleError : Error {
  OracleError(const std::string& what, std::string diagnostics = {})
      : Error(ErrorKind::kOracle, what), diagnostics(std::move(diagnostics)) {}
  std::string diagnostics;
};

struct OracleExecutionError : OracleError {
  OracleExecutionError(const std::string& what, int exit_status, std::string output)
      : OracleError(what, std::move(output)), exit_status(exit_status) {}
  int exit_status;
};

struct OracleTimeoutError : OracleError {
  using OracleError::OracleError;
};

struct OracleResultError : OracleError {
  using OracleError::OracleError;
};

}  // namespace qsit

#endif  // QSIT_ERROR_HPP
