#pragma once

// Fault-mode diagnosis within the DRAM hierarchy (cell, row, column, bank,
// device scope) and DQ/beat statistics of error bitmaps.

#include <map>
#include <set>
#include <span>
#include <string_view>

#include <json.hpp>

#include "memfail/trace_model.hpp"

namespace memfail {

// Half-open time range (begin, end]. `all()` admits every event.
struct TimeRange {
  Timestamp begin = Timestamp::min();
  Timestamp end = Timestamp::max();

  static TimeRange all() { return {}; }
  static TimeRange trailing(Timestamp end, Millis length) { return {end - length, end}; }

  bool contains(Timestamp t) const { return t > begin && t <= end; }
};

struct FaultThresholds {
  int cell_min_ces = 2;
  int row_min_distinct_columns = 2;
  int column_min_distinct_rows = 2;
  Millis analysis_window = days(5);

  void validate() const;
  bool operator==(const FaultThresholds&) const = default;
};

enum class DeviceScope { none = 0, single_device = 1, multi_device = 2 };

std::string_view to_string(DeviceScope s);

struct FaultDiagnosis {
  DimmId dimm;
  int cell_faults = 0;
  int row_faults = 0;
  int column_faults = 0;
  int bank_faults = 0;
  DeviceScope device_scope = DeviceScope::none;

  bool operator==(const FaultDiagnosis&) const = default;
};

struct BitPatternStats {
  int dq_count = 0;
  int beat_count = 0;
  int dq_interval = 0;
  int beat_interval = 0;

  bool operator==(const BitPatternStats&) const = default;
};

// How an "interval" between erroneous DQs or beats is measured.
enum class IntervalMode {
  span,          // max index - min index
  adjacent_gap,  // largest gap between consecutive erroneous indices
};

BitPatternStats bit_pattern_stats(const ErrorBitmap& bitmap, IntervalMode mode = IntervalMode::span);

// Statistics of the bitwise OR of every bitmap whose event lies in `window`.
BitPatternStats aggregate_bit_patterns(std::span<const CeEvent> events, TimeRange window = TimeRange::all(),
                                       IntervalMode mode = IntervalMode::span);

// Diagnoses one DIMM from its CEs inside `window`. Keys include the rank, so
// (rank, device) identifies a chip:
//  - cell fault: one cell with total CE count >= cell_min_ces
//  - row fault: one (chip, bank group, bank, row) with >= row_min_distinct_columns columns
//  - column fault: the transposed condition
//  - bank fault: a (chip, bank group, bank) holding both a row and a column fault
// The returned diagnosis takes its DimmId from the first event.
FaultDiagnosis classify_faults(std::span<const CeEvent> events, const FaultThresholds& thresholds,
                               TimeRange window = TimeRange::all());

enum class FaultMode { cell, row, column, bank, single_device, multi_device };

inline constexpr FaultMode kAllFaultModes[] = {FaultMode::cell, FaultMode::row, FaultMode::column,
                                               FaultMode::bank, FaultMode::single_device, FaultMode::multi_device};

std::string_view to_string(FaultMode m);
bool has_mode(const FaultDiagnosis& d, FaultMode m);

struct ModeRate {
  double rate = 0.0;
  int population = 0;
  int ue_dimms = 0;
};

// Share of DIMMs with each fault mode that also saw a UE. Modes with no
// DIMMs are absent from the map.
std::map<FaultMode, ModeRate> relative_ue_rate(std::span<const FaultDiagnosis> diagnoses,
                                               const std::set<DimmId>& ue_dimms);

nlohmann::json to_json(const FaultDiagnosis& d);
nlohmann::json to_json(const BitPatternStats& s);
nlohmann::json to_json(const FaultThresholds& t);
FaultThresholds thresholds_from_json(const nlohmann::json& j);

}  // namespace memfail
