#include "memfail/error.hpp"

namespace memfail {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::config: return "config";
    case ErrorCode::missing_meta: return "missing-meta";
    case ErrorCode::malformed_bitmap: return "malformed-bitmap";
    case ErrorCode::malformed_hex: return "malformed-hex";
    case ErrorCode::malformed_record: return "malformed-record";
    case ErrorCode::schema_mismatch: return "schema-mismatch";
    case ErrorCode::degenerate_data: return "degenerate-data";
    case ErrorCode::invalid_profile: return "invalid-profile";
    case ErrorCode::missing_prerequisite: return "missing-prerequisite";
    case ErrorCode::unknown_dimm: return "unknown-dimm";
    case ErrorCode::reject_ceiling: return "reject-ceiling";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

int exit_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::config:
    case ErrorCode::invalid_profile:
      return 2;
    default:
      return 3;
  }
}

}  // namespace memfail
