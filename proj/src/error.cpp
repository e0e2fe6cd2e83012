// Copyright 2026 The clear Authors.
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

#include "clear/error.hpp"

namespace clear {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Config: return "config_error";
    case ErrorCode::Data: return "data_error";
    case ErrorCode::Divergence: return "numeric_divergence";
    case ErrorCode::Infeasible: return "infeasible_selection";
  }
  return "unknown_error";
}

}  // namespace clear
