// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace fmbrdf {

/// Broad failure class; the CLI maps each kind to a process exit code.
enum class ErrorKind {
  kDomain,      // precondition or geometry violation
  kEvaluation,  // non-finite values during model evaluation
  kConfig,      // malformed configuration or input files
  kSurrogate,   // surrogate misuse or insufficient quality
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_domain(const std::string& msg) {
  throw Error(ErrorKind::kDomain, msg);
}

[[noreturn]] inline void throw_evaluation(const std::string& msg) {
  throw Error(ErrorKind::kEvaluation, msg);
}

[[noreturn]] inline void throw_config(const std::string& msg) {
  throw Error(ErrorKind::kConfig, msg);
}

[[noreturn]] inline void throw_surrogate(const std::string& msg) {
  throw Error(ErrorKind::kSurrogate, msg);
}

}  // namespace fmbrdf
