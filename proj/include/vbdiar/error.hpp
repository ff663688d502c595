// Copyright 2026 The vbdiar Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VBDIAR_ERROR_HPP_
#define VBDIAR_ERROR_HPP_

#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <utility>

namespace vbdiar {

enum class ErrorKind {
  kParse,             // malformed text input
  kFormat,            // well-formed but violates a format invariant
  kEmptyInput,
  kInsufficientData,
  kDimension,
  kDegenerate,        // input admits no meaningful answer (zero vector, constant scores)
  kTraining,
  kSingular,
  kUndefinedMetric,
  kNumerical,
  kConfig,
  kIo,
};

inline const char *ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kEmptyInput: return "empty input";
    case ErrorKind::kInsufficientData: return "insufficient data";
    case ErrorKind::kDimension: return "dimension mismatch";
    case ErrorKind::kDegenerate: return "degenerate input";
    case ErrorKind::kTraining: return "training error";
    case ErrorKind::kSingular: return "singular matrix";
    case ErrorKind::kUndefinedMetric: return "undefined metric";
    case ErrorKind::kNumerical: return "numerical failure";
    case ErrorKind::kConfig: return "configuration error";
    case ErrorKind::kIo: return "I/O error";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string &what)
      : std::runtime_error(std::string(ErrorKindName(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }

  /// Process exit code: 1 configuration, 3 numerical, 2 any other data problem.
  int exit_code() const {
    switch (kind_) {
      case ErrorKind::kConfig: return 1;
      case ErrorKind::kNumerical: return 3;
      default: return 2;
    }
  }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void Fail(ErrorKind kind, const std::string &what) {
  throw Error(kind, what);
}

/// Sink for non-fatal diagnostics. Defaults to stderr; tests may swap it.
inline std::function<void(const std::string &)> &WarningSink() {
  static std::function<void(const std::string &)> sink;
  return sink;
}

inline void Warn(const std::string &msg) {
  auto &sink = WarningSink();
  if (sink) {
    sink(msg);
  } else {
    std::cerr << "WARNING: " << msg << '\n';
  }
}

}  // namespace vbdiar

#endif  // VBDIAR_ERROR_HPP_
