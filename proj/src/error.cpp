// Copyright 2026 The binxform Authors
// SPDX-License-Identifier: Apache-2.0

#include "bxf/error.hpp"

namespace bxf {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::argument: return "argument";
    case ErrorCode::dimension: return "dimension";
    case ErrorCode::domain: return "domain";
    case ErrorCode::contract: return "contract";
    case ErrorCode::io: return "io";
    case ErrorCode::parse: return "parse";
    case ErrorCode::numerical: return "numerical";
    case ErrorCode::divergence: return "divergence";
    case ErrorCode::internal: return "internal";
  }
  return "unknown";
}

}  // namespace bxf
