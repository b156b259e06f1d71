#pragma once

// Parsers from external log shapes (canonical JSON Lines, column-mapped CSV)
// into the trace model, plus error-bitmap decoding.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "memfail/trace_model.hpp"

namespace memfail {

// Parses 16 hex digits into the beat-major 64-bit word. Throws
// Error(malformed_hex).
std::uint64_t parse_hex_word(std::string_view hex);

// Throws Error(malformed_hex) for bad hex and Error(malformed_bitmap) for
// bits outside the device's DQ width. An all-zero bitmap decodes fine; it is
// only invalid as a CE payload.
ErrorBitmap decode_bitmap(std::string_view hex, DataWidth width);
std::string encode_bitmap(const ErrorBitmap& bitmap);

// A rejected input line. `line` and `column` are 1-based; `column` points
// at the offending field (or the parser's error offset).
struct RawLogLine {
  std::string format;
  std::size_t line = 0;
  std::size_t column = 0;
  std::string raw;
  std::vector<std::string> diagnostics;
};

struct IngestOptions {
  // Parsing aborts with Error(reject_ceiling) when the share of rejected
  // data lines exceeds this.
  double max_reject_rate = 1.0;
};

struct IngestResult {
  EventLog events;
  std::vector<RawLogLine> rejects;
  std::size_t data_lines = 0;
};

IngestResult parse_jsonl_trace(std::istream& is, const IngestOptions& options = {});

// Maps canonical fields onto CSV header names. Unset optional columns take
// their defaults: every row is a CE, count 1, width `default_width`.
struct ColumnMap {
  std::optional<std::string> kind;
  std::string timestamp = "ts";
  std::string server = "server";
  std::string socket = "socket";
  std::string channel = "channel";
  std::string slot = "slot";
  std::string rank = "rank";
  std::string device = "device";
  std::string bank_group = "bank_group";
  std::string bank = "bank";
  std::string row = "row";
  std::string column = "column";
  std::string bitmap = "bitmap";
  std::optional<std::string> count;
  std::optional<std::string> width;
  DataWidth default_width = DataWidth::x4;
  char delimiter = ',';

  static ColumnMap canonical();
  static ColumnMap from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

IngestResult parse_csv_trace(std::istream& is, const ColumnMap& map, const IngestOptions& options = {});

// CSV in the canonical column layout (ColumnMap::canonical()).
void write_csv_trace(std::ostream& os, const EventLog& log);

nlohmann::json to_json(const RawLogLine& r);

}  // namespace memfail
