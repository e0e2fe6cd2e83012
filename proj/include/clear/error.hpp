// Copyright 2026 The clear Authors.
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

#pragma once

#include <stdexcept>
#include <string>

namespace clear {

// Error categories map one-to-one onto CLI exit codes.
enum class ErrorCode : int {
  Config = 2,
  Data = 3,
  Divergence = 4,
  Infeasible = 5,
};

const char* to_string(ErrorCode code);

// Every module reports failures through this type. `kind` is a stable,
// machine-readable sub-code (e.g. "bad_magic", "truncated").
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string kind, const std::string& message)
      : std::runtime_error(message), code_(code), kind_(std::move(kind)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(code_); }

 private:
  ErrorCode code_;
  std::string kind_;
};

[[noreturn]] inline void fail(ErrorCode code, std::string kind, const std::string& message) {
  throw Error(code, std::move(kind), message);
}

}  // namespace clear
