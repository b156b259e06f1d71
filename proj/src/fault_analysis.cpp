#include "memfail/fault_analysis.hpp"

#include <algorithm>
#include <array>
#include <tuple>
#include <vector>

#include <fmt/format.h>

namespace memfail {

void FaultThresholds::validate() const {
  if (cell_min_ces < 1 || row_min_distinct_columns < 1 || column_min_distinct_rows < 1) {
    throw Error(ErrorCode::config, "fault thresholds must be >= 1");
  }
  if (analysis_window.count() <= 0) throw Error(ErrorCode::config, "analysis window must be positive");
}

std::string_view to_string(DeviceScope s) {
  switch (s) {
    case DeviceScope::none: return "none";
    case DeviceScope::single_device: return "single_device";
    case DeviceScope::multi_device: return "multi_device";
  }
  return "none";
}

std::string_view to_string(FaultMode m) {
  switch (m) {
    case FaultMode::cell: return "cell";
    case FaultMode::row: return "row";
    case FaultMode::column: return "column";
    case FaultMode::bank: return "bank";
    case FaultMode::single_device: return "single_device";
    case FaultMode::multi_device: return "multi_device";
  }
  return "cell";
}

namespace {

// Count and interval of the set indices of an 8-bit occupancy mask.
std::pair<int, int> mask_stats(unsigned mask, IntervalMode mode) {
  int count = 0;
  int first = -1;
  int prev = -1;
  int widest = 0;
  for (int i = 0; i < 8; ++i) {
    if (((mask >> i) & 1u) == 0) continue;
    ++count;
    if (first < 0) first = i;
    if (prev >= 0) widest = std::max(widest, i - prev);
    prev = i;
  }
  if (count <= 1) return {count, 0};
  return {count, mode == IntervalMode::span ? prev - first : widest};
}

}  // namespace

BitPatternStats bit_pattern_stats(const ErrorBitmap& bitmap, IntervalMode mode) {
  unsigned dq_mask = 0;
  unsigned beat_mask = 0;
  for (int b = 0; b < ErrorBitmap::kBeats; ++b) {
    const unsigned m = bitmap.beat_mask(b);
    dq_mask |= m;
    if (m != 0) beat_mask |= 1u << b;
  }
  BitPatternStats s;
  std::tie(s.dq_count, s.dq_interval) = mask_stats(dq_mask, mode);
  std::tie(s.beat_count, s.beat_interval) = mask_stats(beat_mask, mode);
  return s;
}

BitPatternStats aggregate_bit_patterns(std::span<const CeEvent> events, TimeRange window, IntervalMode mode) {
  ErrorBitmap acc;
  for (const auto& e : events) {
    if (window.contains(e.timestamp)) acc |= e.bitmap;
  }
  return bit_pattern_stats(acc, mode);
}

namespace {

using ChipKey = std::pair<int, int>;                        // rank, device
using BankKey = std::tuple<int, int, int, int>;             // chip, bank group, bank
using LineKey = std::tuple<int, int, int, int, std::int64_t>;  // bank + row or column

template <typename Key, typename Value>
int count_groups(std::vector<std::pair<Key, Value>>& items, int threshold, std::vector<Key>* hits = nullptr) {
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
  int groups = 0;
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    while (j < items.size() && items[j].first == items[i].first) ++j;
    if (static_cast<int>(j - i) >= threshold) {
      ++groups;
      if (hits) hits->push_back(items[i].first);
    }
    i = j;
  }
  return groups;
}

BankKey bank_of(const LineKey& k) { return {std::get<0>(k), std::get<1>(k), std::get<2>(k), std::get<3>(k)}; }

}  // namespace

FaultDiagnosis classify_faults(std::span<const CeEvent> events, const FaultThresholds& thresholds,
                               TimeRange window) {
  FaultDiagnosis d;
  if (!events.empty()) d.dimm = events.front().dimm;

  std::vector<std::pair<CellAddress, int>> cells;
  std::vector<std::pair<LineKey, std::int64_t>> rows;     // row line -> column
  std::vector<std::pair<LineKey, std::int64_t>> columns;  // column line -> row
  std::vector<ChipKey> chips;
  for (const auto& e : events) {
    if (!window.contains(e.timestamp)) continue;
    const auto& c = e.cell;
    cells.emplace_back(c, e.count);
    rows.push_back({{c.rank, c.device, c.bank_group, c.bank, c.row}, c.column});
    columns.push_back({{c.rank, c.device, c.bank_group, c.bank, c.column}, c.row});
    chips.emplace_back(c.rank, c.device);
  }
  if (cells.empty()) return d;

  std::sort(cells.begin(), cells.end());
  for (std::size_t i = 0; i < cells.size();) {
    std::int64_t total = 0;
    std::size_t j = i;
    for (; j < cells.size() && cells[j].first == cells[i].first; ++j) total += cells[j].second;
    if (total >= thresholds.cell_min_ces) ++d.cell_faults;
    i = j;
  }

  std::vector<LineKey> row_hits;
  std::vector<LineKey> column_hits;
  d.row_faults = count_groups(rows, thresholds.row_min_distinct_columns, &row_hits);
  d.column_faults = count_groups(columns, thresholds.column_min_distinct_rows, &column_hits);

  std::vector<BankKey> row_banks;
  std::vector<BankKey> column_banks;
  for (const auto& k : row_hits) row_banks.push_back(bank_of(k));
  for (const auto& k : column_hits) column_banks.push_back(bank_of(k));
  std::sort(row_banks.begin(), row_banks.end());
  row_banks.erase(std::unique(row_banks.begin(), row_banks.end()), row_banks.end());
  std::sort(column_banks.begin(), column_banks.end());
  column_banks.erase(std::unique(column_banks.begin(), column_banks.end()), column_banks.end());
  std::vector<BankKey> both;
  std::set_intersection(row_banks.begin(), row_banks.end(), column_banks.begin(), column_banks.end(),
                        std::back_inserter(both));
  d.bank_faults = static_cast<int>(both.size());

  std::sort(chips.begin(), chips.end());
  const auto distinct = std::unique(chips.begin(), chips.end()) - chips.begin();
  d.device_scope = distinct >= 2 ? DeviceScope::multi_device : DeviceScope::single_device;
  return d;
}

bool has_mode(const FaultDiagnosis& d, FaultMode m) {
  switch (m) {
    case FaultMode::cell: return d.cell_faults > 0;
    case FaultMode::row: return d.row_faults > 0;
    case FaultMode::column: return d.column_faults > 0;
    case FaultMode::bank: return d.bank_faults > 0;
    case FaultMode::single_device: return d.device_scope == DeviceScope::single_device;
    case FaultMode::multi_device: return d.device_scope == DeviceScope::multi_device;
  }
  return false;
}

std::map<FaultMode, ModeRate> relative_ue_rate(std::span<const FaultDiagnosis> diagnoses,
                                               const std::set<DimmId>& ue_dimms) {
  std::map<FaultMode, ModeRate> out;
  for (const auto& d : diagnoses) {
    const bool failed = ue_dimms.count(d.dimm) > 0;
    for (auto m : kAllFaultModes) {
      if (!has_mode(d, m)) continue;
      auto& r = out[m];
      ++r.population;
      if (failed) ++r.ue_dimms;
    }
  }
  for (auto& [m, r] : out) r.rate = static_cast<double>(r.ue_dimms) / static_cast<double>(r.population);
  return out;
}

nlohmann::json to_json(const FaultDiagnosis& d) {
  return {{"dimm", d.dimm.to_string()},
          {"cell_faults", d.cell_faults},
          {"row_faults", d.row_faults},
          {"column_faults", d.column_faults},
          {"bank_faults", d.bank_faults},
          {"device_scope", std::string(to_string(d.device_scope))}};
}

nlohmann::json to_json(const BitPatternStats& s) {
  return {{"dq_count", s.dq_count},
          {"beat_count", s.beat_count},
          {"dq_interval", s.dq_interval},
          {"beat_interval", s.beat_interval}};
}

nlohmann::json to_json(const FaultThresholds& t) {
  return {{"cell_min_ces", t.cell_min_ces},
          {"row_min_distinct_columns", t.row_min_distinct_columns},
          {"column_min_distinct_rows", t.column_min_distinct_rows},
          {"analysis_window_ms", t.analysis_window.count()}};
}

FaultThresholds thresholds_from_json(const nlohmann::json& j) {
  FaultThresholds t;
  try {
    t.cell_min_ces = j.value("cell_min_ces", t.cell_min_ces);
    t.row_min_distinct_columns = j.value("row_min_distinct_columns", t.row_min_distinct_columns);
    t.column_min_distinct_rows = j.value("column_min_distinct_rows", t.column_min_distinct_rows);
    if (j.contains("analysis_window_ms")) t.analysis_window = Millis{j.at("analysis_window_ms").get<std::int64_t>()};
    if (j.contains("analysis_window_days")) {
      t.analysis_window = Millis{static_cast<std::int64_t>(j.at("analysis_window_days").get<double>() * 86'400'000.0)};
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::config, std::string("thresholds: ") + e.what());
  }
  t.validate();
  return t;
}

}  // namespace memfail
