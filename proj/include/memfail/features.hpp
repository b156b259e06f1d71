#pragma once

// Windowed feature extraction and UE-in-future-window labelling. Samples are
// produced per DIMM per prediction tick, either in one pass over a finished
// trace (batch) or incrementally from a time-ordered event stream.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "memfail/fault_analysis.hpp"
#include "memfail/trace_model.hpp"

namespace memfail {

enum class FeatureKind { count, rate, categorical, flag };
enum class FeatureSource { ce_stats, fault_modes, bit_patterns, static_meta, events };

std::string_view to_string(FeatureKind k);
std::string_view to_string(FeatureSource s);

struct FeatureSpec {
  std::string name;
  FeatureKind kind;
  FeatureSource source;

  bool operator==(const FeatureSpec&) const = default;
};

// Known values of the one-hot static attributes. Anything else lands in the
// "other" bucket.
struct CategoryLists {
  std::vector<std::string> manufacturers = {"vendor_a", "vendor_b", "vendor_c", "vendor_d"};
  std::vector<std::string> chip_processes = {"1x", "1y", "1z"};

  bool operator==(const CategoryLists&) const = default;
};

struct FeatureConfig {
  WindowConfig window;
  FaultThresholds thresholds;  // analysis_window drives fault-mode and bit-pattern features
  std::vector<Millis> sub_windows = {minutes(1), hours(1), hours(24), days(5)};
  int storm_threshold = 10;
  Millis storm_window = hours(1);
  IntervalMode interval_mode = IntervalMode::span;
  CategoryLists categories;

  void validate() const;
  nlohmann::json to_json() const;
  static FeatureConfig from_json(const nlohmann::json& j);
};

class FeatureSchema {
 public:
  explicit FeatureSchema(FeatureConfig config);

  const FeatureConfig& config() const { return config_; }
  std::span<const FeatureSpec> features() const { return features_; }
  std::size_t size() const { return features_.size(); }
  std::vector<std::string> names() const;
  std::optional<std::size_t> index_of(std::string_view name) const;

  // Stable 64-bit FNV-1a digest (16 hex digits) over the feature list and
  // every featurization parameter.
  const std::string& hash() const { return hash_; }

  // Longest look-back any feature needs.
  Millis max_lookback() const;

  nlohmann::json to_json() const;

 private:
  FeatureConfig config_;
  std::vector<FeatureSpec> features_;
  std::string hash_;
};

enum class Label : std::uint8_t { negative = 0, positive = 1 };

// Positive iff some UE time u satisfies t + lead <= u <= t + lead + prediction.
// `ue_times` must be sorted.
Label label(Timestamp t, std::span<const Timestamp> ue_times, const WindowConfig& cfg);

struct FeatureVector {
  std::vector<double> values;
  bool unknown_category = false;
};

// Feature vector at tick `t` from the DIMM's CE history (sorted by time).
// Events after `t` are never read.
FeatureVector featurize(std::span<const CeEvent> history, const DimmMeta& meta, Timestamp t,
                        const FeatureSchema& schema);

// Same computation from a truncated history: `recent` must hold every CE of
// the DIMM in (t - schema.max_lookback(), t]; `first_ce` is the DIMM's first
// CE time overall.
FeatureVector featurize_recent(std::span<const CeEvent> recent, std::optional<Timestamp> first_ce,
                               const DimmMeta& meta, Timestamp t, const FeatureSchema& schema);

struct Sample {
  DimmId dimm;
  Timestamp t;
  std::vector<double> features;
  Label label = Label::negative;

  bool operator==(const Sample&) const = default;
};

enum class SampleMode { batch, stream };

struct SampleSet {
  std::vector<Sample> samples;
  std::vector<DimmId> unknown_category_dimms;
};

// One sample per DIMM per tick. Ticks start at the DIMM's first CE, step by
// the prediction interval and stop before the trace end and before the
// DIMM's first UE. Output is ordered by (dimm, t) in both modes.
SampleSet build_samples(const ValidatedTrace& trace, const FeatureSchema& schema, SampleMode mode,
                        int threads = 1);

// Incremental featurizer. Events must arrive in non-decreasing timestamp
// order; a tick is emitted once an event later than it has been seen, and
// its label is final once the stream has moved past its prediction window.
class StreamFeaturizer {
 public:
  StreamFeaturizer(const FeatureSchema& schema, std::map<DimmId, DimmMeta> meta);

  void push(const CeEvent& e);
  void push(const UeEvent& e);

  // Samples whose label can no longer change, in emission order.
  std::vector<Sample> drain_ready();
  // Flushes everything; pending samples are labelled with the UEs seen.
  SampleSet finish();

 private:
  struct DimmState {
    std::vector<CeEvent> recent;
    std::optional<Timestamp> first_ce;
    std::optional<Timestamp> next_tick;
    std::optional<Timestamp> first_ue;
    std::vector<Timestamp> ue_times;
    bool unknown_category = false;
  };
  struct Pending {
    DimmId dimm;
    Timestamp t;
    std::vector<double> features;
  };
  using HeapEntry = std::pair<Timestamp, DimmId>;

  void advance(Timestamp ts);
  void schedule(const DimmId& dimm, const DimmState& state);
  Sample finalize(Pending&& p) const;

  const FeatureSchema& schema_;
  std::map<DimmId, DimmMeta> meta_;
  std::map<DimmId, DimmState> states_;
  std::priority_queue<HeapEntry, std::vector<HeapEntry>, std::greater<>> ticks_;
  std::vector<Pending> pending_;
  std::size_t ready_begin_ = 0;
  std::optional<Timestamp> watermark_;
  std::vector<Sample> finished_;
};

// CSV feature matrix: a "# schema_hash=<hash>" line, a header of id columns
// (server, socket, channel, slot, t), the schema's feature names and
// "label", then one row per sample.
void write_feature_csv(std::ostream& os, const FeatureSchema& schema, std::span<const Sample> samples);

struct FeatureMatrix {
  std::string schema_hash;
  std::vector<std::string> feature_names;
  std::vector<Sample> samples;
};

FeatureMatrix read_feature_csv(std::istream& is);

}  // namespace memfail
