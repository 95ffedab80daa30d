// SPDX-License-Identifier: Apache-2.0
#include "common/error.hpp"

namespace truthlens {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kFormat: return "format error";
    case ErrorCode::kBadMagic: return "bad magic";
    case ErrorCode::kLengthMismatch: return "length mismatch";
    case ErrorCode::kNonFinite: return "non-finite value";
    case ErrorCode::kVersionMismatch: return "version mismatch";
    case ErrorCode::kMissingInput: return "missing input";
    case ErrorCode::kMisaligned: return "misaligned ids";
    case ErrorCode::kInternal: return "internal error";
  }
  return "unknown";
}

}  // namespace truthlens
