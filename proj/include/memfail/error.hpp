#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace memfail {

enum class ErrorCode {
  config,
  missing_meta,
  malformed_bitmap,
  malformed_hex,
  malformed_record,
  schema_mismatch,
  degenerate_data,
  invalid_profile,
  missing_prerequisite,
  unknown_dimm,
  reject_ceiling,
  io,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Process exit status for a failure of this kind: 2 for configuration
// problems, 3 for anything wrong with the data.
int exit_status(ErrorCode code);

}  // namespace memfail
