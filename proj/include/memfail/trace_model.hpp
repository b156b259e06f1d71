#pragma once

// Canonical error-trace types: DIMM identity, DRAM cell addresses, CE/UE
// events, static DIMM attributes and the windowing configuration.

#include <array>
#include <chrono>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "memfail/error.hpp"

namespace memfail {

using Millis = std::chrono::milliseconds;
using Timestamp = std::chrono::time_point<std::chrono::system_clock, Millis>;

constexpr Timestamp from_epoch_ms(std::int64_t ms) { return Timestamp{Millis{ms}}; }
constexpr std::int64_t epoch_ms(Timestamp t) { return t.time_since_epoch().count(); }

constexpr Millis minutes(std::int64_t n) { return std::chrono::duration_cast<Millis>(std::chrono::minutes{n}); }
constexpr Millis hours(std::int64_t n) { return std::chrono::duration_cast<Millis>(std::chrono::hours{n}); }
constexpr Millis days(std::int64_t n) { return hours(24 * n); }

struct DimmId {
  std::string server_id;
  int socket = 0;
  int channel = 0;
  int slot = 0;

  auto operator<=>(const DimmId&) const = default;
  bool operator==(const DimmId&) const = default;

  std::string to_string() const;
};

struct CellAddress {
  int rank = 0;
  int device = 0;
  int bank_group = 0;
  int bank = 0;
  std::int64_t row = 0;
  std::int64_t column = 0;

  auto operator<=>(const CellAddress&) const = default;
  bool operator==(const CellAddress&) const = default;
};

enum class DataWidth { x4, x8 };

constexpr int dq_width(DataWidth w) { return w == DataWidth::x4 ? 4 : 8; }
// Devices in one 72-bit rank.
constexpr int devices_per_rank(DataWidth w) { return 72 / dq_width(w); }

std::string_view to_string(DataWidth w);
std::optional<DataWidth> parse_data_width(std::string_view s);

// Error bits of one burst seen on one device: 8 beats, one DQ mask per beat.
// Bit d of beat b set means DQ d was wrong during beat b.
class ErrorBitmap {
 public:
  static constexpr int kBeats = 8;

  constexpr ErrorBitmap() = default;
  explicit constexpr ErrorBitmap(std::array<std::uint8_t, kBeats> beats) : beats_(beats) {}

  // Beat 0 occupies the most significant byte.
  static constexpr ErrorBitmap from_word(std::uint64_t word) {
    std::array<std::uint8_t, kBeats> beats{};
    for (int b = 0; b < kBeats; ++b) {
      beats[b] = static_cast<std::uint8_t>(word >> (8 * (kBeats - 1 - b)));
    }
    return ErrorBitmap(beats);
  }
  constexpr std::uint64_t word() const {
    std::uint64_t w = 0;
    for (int b = 0; b < kBeats; ++b) w = (w << 8) | beats_[b];
    return w;
  }

  constexpr std::uint8_t beat_mask(int beat) const { return beats_[beat]; }
  constexpr bool test(int beat, int dq) const { return (beats_[beat] >> dq) & 1u; }
  constexpr void set(int beat, int dq) { beats_[beat] = static_cast<std::uint8_t>(beats_[beat] | (1u << dq)); }
  constexpr bool empty() const { return word() == 0; }
  int popcount() const;
  // True when no bit above dq `width - 1` is set in any beat.
  bool fits_width(int width) const;

  std::string to_hex() const;

  constexpr ErrorBitmap& operator|=(const ErrorBitmap& o) {
    for (int b = 0; b < kBeats; ++b) beats_[b] = static_cast<std::uint8_t>(beats_[b] | o.beats_[b]);
    return *this;
  }
  friend constexpr ErrorBitmap operator|(ErrorBitmap a, const ErrorBitmap& b) { return a |= b; }

  auto operator<=>(const ErrorBitmap&) const = default;
  bool operator==(const ErrorBitmap&) const = default;

 private:
  std::array<std::uint8_t, kBeats> beats_{};
};

struct CeEvent {
  Timestamp timestamp;
  DimmId dimm;
  CellAddress cell;
  ErrorBitmap bitmap;
  int count = 1;  // corrections coalesced into this log entry

  auto operator<=>(const CeEvent&) const = default;
  bool operator==(const CeEvent&) const = default;
};

struct UeEvent {
  Timestamp timestamp;
  DimmId dimm;
  std::optional<CellAddress> cell;
  bool sudden = false;

  bool operator==(const UeEvent&) const = default;
};

enum class Platform { purley, whitley, k920, custom };

std::string_view to_string(Platform p);
std::optional<Platform> parse_platform(std::string_view s);

struct DimmMeta {
  DimmId dimm;
  std::string manufacturer;
  DataWidth data_width = DataWidth::x4;
  int frequency = 0;  // MT/s
  std::string chip_process;
  Platform platform = Platform::custom;

  bool operator==(const DimmMeta&) const = default;
};

// Sampling and labelling windows. Defaults are the production settings:
// 5 d history, 3 h lead, 30 d validation window, 1 min logging, 5 min ticks.
struct WindowConfig {
  Millis observation = days(5);
  Millis lead = hours(3);
  Millis prediction = days(30);
  Millis sample_interval = minutes(1);
  Millis prediction_interval = minutes(5);

  // Throws Error(config) unless every duration is positive, lead <= 3 h and
  // sample_interval <= prediction_interval.
  void validate() const;

  bool operator==(const WindowConfig&) const = default;
};

// Unvalidated events as read from a file or produced by a generator.
struct EventLog {
  std::vector<CeEvent> ces;
  std::vector<UeEvent> ues;

  bool empty() const { return ces.empty() && ues.empty(); }
};

struct ValidationIssue {
  ErrorCode code;
  DimmId dimm;
  Timestamp timestamp;
  std::string detail;
};

struct ValidationSummary {
  std::size_t input_ces = 0;
  std::size_t input_ues = 0;
  std::size_t rejected_ces = 0;
  std::size_t rejected_ues = 0;
  std::size_t sudden_flags_changed = 0;
  std::size_t dropped_dimms = 0;  // removed by population filtering
  std::vector<ValidationIssue> issues;
};

struct ValidateOptions {
  bool strict = false;  // throw on the first rejected record
};

// Events sorted by (dimm, timestamp) with a per-DIMM index. Immutable once
// built; construct through validate_trace.
class ValidatedTrace {
 public:
  ValidatedTrace() = default;

  const std::vector<CeEvent>& ces() const { return ces_; }
  const std::vector<UeEvent>& ues() const { return ues_; }
  const std::map<DimmId, DimmMeta>& meta() const { return meta_; }
  const ValidationSummary& summary() const { return summary_; }

  std::span<const CeEvent> ces_of(const DimmId& dimm) const;
  std::span<const UeEvent> ues_of(const DimmId& dimm) const;
  const DimmMeta* meta_of(const DimmId& dimm) const;

  // DIMMs with at least one event, in DimmId order.
  std::vector<DimmId> dimms() const;
  std::vector<DimmId> ue_dimms() const;

  bool empty() const { return ces_.empty() && ues_.empty(); }
  std::optional<Timestamp> first_timestamp() const;
  std::optional<Timestamp> last_timestamp() const;

 private:
  friend ValidatedTrace validate_trace(EventLog, std::span<const DimmMeta>, const ValidateOptions&);
  friend ValidatedTrace filter_predictable_population(const ValidatedTrace&);

  using Range = std::pair<std::size_t, std::size_t>;

  void build_index();

  std::vector<CeEvent> ces_;
  std::vector<UeEvent> ues_;
  std::map<DimmId, DimmMeta> meta_;
  std::map<DimmId, Range> ce_index_;
  std::map<DimmId, Range> ue_index_;
  ValidationSummary summary_;
};

// Orders events by DIMM and time, rejects records without metadata or with
// malformed bitmaps, and recomputes every UE's sudden flag.
ValidatedTrace validate_trace(EventLog events, std::span<const DimmMeta> meta,
                              const ValidateOptions& options = {});

// Keeps only DIMMs that carry CE history and whose first UE, if any, was
// preceded by a CE.
ValidatedTrace filter_predictable_population(const ValidatedTrace& trace);

// Total order used for canonical event ordering.
bool ce_less(const CeEvent& a, const CeEvent& b);
bool ue_less(const UeEvent& a, const UeEvent& b);

}  // namespace memfail
