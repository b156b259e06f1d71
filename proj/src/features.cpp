#include "memfail/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <thread>
#include <tuple>

#include <fmt/format.h>

#include "memfail/hash.hpp"

namespace memfail {

using nlohmann::json;

std::string_view to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::count: return "count";
    case FeatureKind::rate: return "rate";
    case FeatureKind::categorical: return "categorical";
    case FeatureKind::flag: return "flag";
  }
  return "count";
}

std::string_view to_string(FeatureSource s) {
  switch (s) {
    case FeatureSource::ce_stats: return "ce_stats";
    case FeatureSource::fault_modes: return "fault_modes";
    case FeatureSource::bit_patterns: return "bit_patterns";
    case FeatureSource::static_meta: return "static_meta";
    case FeatureSource::events: return "events";
  }
  return "events";
}

namespace {

std::string duration_label(Millis d) {
  const auto ms = d.count();
  if (ms % days(1).count() == 0 && ms / days(1).count() > 1) return fmt::format("{}d", ms / days(1).count());
  if (ms % hours(1).count() == 0) return fmt::format("{}h", ms / hours(1).count());
  if (ms % minutes(1).count() == 0) return fmt::format("{}m", ms / minutes(1).count());
  if (ms % 1000 == 0) return fmt::format("{}s", ms / 1000);
  return fmt::format("{}ms", ms);
}

constexpr Platform kPlatforms[] = {Platform::purley, Platform::whitley, Platform::k920, Platform::custom};

}  // namespace

void FeatureConfig::validate() const {
  window.validate();
  thresholds.validate();
  if (sub_windows.empty()) throw Error(ErrorCode::config, "at least one CE count sub-window is required");
  for (auto w : sub_windows) {
    if (w.count() <= 0) throw Error(ErrorCode::config, "sub-windows must be positive");
  }
  if (storm_threshold < 1 || storm_window.count() <= 0) throw Error(ErrorCode::config, "invalid CE-storm setting");
}

json FeatureConfig::to_json() const {
  json sub = json::array();
  for (auto w : sub_windows) sub.push_back(w.count());
  return {{"observation_ms", window.observation.count()},
          {"lead_ms", window.lead.count()},
          {"prediction_ms", window.prediction.count()},
          {"sample_interval_ms", window.sample_interval.count()},
          {"prediction_interval_ms", window.prediction_interval.count()},
          {"thresholds", memfail::to_json(thresholds)},
          {"sub_windows_ms", sub},
          {"storm_threshold", storm_threshold},
          {"storm_window_ms", storm_window.count()},
          {"interval_mode", interval_mode == IntervalMode::span ? "span" : "adjacent_gap"},
          {"manufacturers", categories.manufacturers},
          {"chip_processes", categories.chip_processes}};
}

FeatureConfig FeatureConfig::from_json(const json& j) {
  FeatureConfig c;
  try {
    auto ms = [&](const char* key, Millis& field) {
      if (j.contains(key)) field = Millis{j.at(key).get<std::int64_t>()};
    };
    ms("observation_ms", c.window.observation);
    ms("lead_ms", c.window.lead);
    ms("prediction_ms", c.window.prediction);
    ms("sample_interval_ms", c.window.sample_interval);
    ms("prediction_interval_ms", c.window.prediction_interval);
    if (j.contains("thresholds")) c.thresholds = thresholds_from_json(j.at("thresholds"));
    if (j.contains("sub_windows_ms")) {
      c.sub_windows.clear();
      for (const auto& w : j.at("sub_windows_ms")) c.sub_windows.push_back(Millis{w.get<std::int64_t>()});
    }
    c.storm_threshold = j.value("storm_threshold", c.storm_threshold);
    ms("storm_window_ms", c.storm_window);
    if (j.contains("interval_mode")) {
      const auto m = j.at("interval_mode").get<std::string>();
      if (m == "span") {
        c.interval_mode = IntervalMode::span;
      } else if (m == "adjacent_gap") {
        c.interval_mode = IntervalMode::adjacent_gap;
      } else {
        throw Error(ErrorCode::config, "interval_mode must be span or adjacent_gap");
      }
    }
    if (j.contains("manufacturers")) c.categories.manufacturers = j.at("manufacturers").get<std::vector<std::string>>();
    if (j.contains("chip_processes")) c.categories.chip_processes = j.at("chip_processes").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config, std::string("feature config: ") + e.what());
  }
  c.validate();
  return c;
}

FeatureSchema::FeatureSchema(FeatureConfig config) : config_(std::move(config)) {
  config_.validate();
  auto add = [&](std::string name, FeatureKind kind, FeatureSource source) {
    features_.push_back({std::move(name), kind, source});
  };
  for (auto w : config_.sub_windows) add("ce_count_" + duration_label(w), FeatureKind::count, FeatureSource::ce_stats);
  add("ce_rate_per_day", FeatureKind::rate, FeatureSource::ce_stats);
  for (const char* n : {"distinct_devices", "distinct_banks", "distinct_rows", "distinct_columns", "distinct_cells"}) {
    add(n, FeatureKind::count, FeatureSource::ce_stats);
  }
  for (const char* n : {"cell_faults", "row_faults", "column_faults", "bank_faults"}) {
    add(n, FeatureKind::count, FeatureSource::fault_modes);
  }
  add("single_device_fault", FeatureKind::flag, FeatureSource::fault_modes);
  add("multi_device_fault", FeatureKind::flag, FeatureSource::fault_modes);
  for (const char* n : {"dq_count", "beat_count", "dq_interval", "beat_interval", "max_event_dq_count",
                        "max_event_beat_count"}) {
    add(n, FeatureKind::count, FeatureSource::bit_patterns);
  }
  add("ce_storm", FeatureKind::flag, FeatureSource::events);
  add("data_width", FeatureKind::count, FeatureSource::static_meta);
  add("frequency", FeatureKind::count, FeatureSource::static_meta);
  for (const auto& m : config_.categories.manufacturers) {
    add("manufacturer_" + m, FeatureKind::categorical, FeatureSource::static_meta);
  }
  add("manufacturer_other", FeatureKind::categorical, FeatureSource::static_meta);
  for (const auto& p : config_.categories.chip_processes) {
    add("chip_process_" + p, FeatureKind::categorical, FeatureSource::static_meta);
  }
  add("chip_process_other", FeatureKind::categorical, FeatureSource::static_meta);
  for (auto p : kPlatforms) {
    add("platform_" + std::string(to_string(p)), FeatureKind::categorical, FeatureSource::static_meta);
  }

  std::set<std::string> seen;
  for (const auto& f : features_) {
    if (!seen.insert(f.name).second) throw Error(ErrorCode::config, "duplicate feature name " + f.name);
  }

  std::uint64_t h = kFnvOffset;
  for (const auto& f : features_) {
    h = fnv1a64(fmt::format("{}:{}:{};", f.name, to_string(f.kind), to_string(f.source)), h);
  }
  h = fnv1a64(config_.to_json().dump(), h);
  hash_ = hex64(h);
}

std::vector<std::string> FeatureSchema::names() const {
  std::vector<std::string> out;
  out.reserve(features_.size());
  for (const auto& f : features_) out.push_back(f.name);
  return out;
}

std::optional<std::size_t> FeatureSchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].name == name) return i;
  }
  return std::nullopt;
}

Millis FeatureSchema::max_lookback() const {
  Millis m = std::max(config_.thresholds.analysis_window, config_.storm_window);
  for (auto w : config_.sub_windows) m = std::max(m, w);
  return m;
}

json FeatureSchema::to_json() const {
  json feats = json::array();
  for (const auto& f : features_) {
    feats.push_back({{"name", f.name}, {"kind", to_string(f.kind)}, {"source", to_string(f.source)}});
  }
  return {{"version", 1}, {"hash", hash_}, {"features", feats}, {"params", config_.to_json()}};
}

Label label(Timestamp t, std::span<const Timestamp> ue_times, const WindowConfig& cfg) {
  const Timestamp lo = t + cfg.lead;
  const Timestamp hi = lo + cfg.prediction;
  const auto it = std::lower_bound(ue_times.begin(), ue_times.end(), lo);
  return (it != ue_times.end() && *it <= hi) ? Label::positive : Label::negative;
}

namespace {

// Index of the first event with timestamp > bound; events are time-sorted.
std::size_t first_after(std::span<const CeEvent> events, Timestamp bound) {
  return static_cast<std::size_t>(
      std::upper_bound(events.begin(), events.end(), bound,
                       [](Timestamp b, const CeEvent& e) { return b < e.timestamp; }) -
      events.begin());
}

template <typename T>
double distinct_count(std::vector<T>& v) {
  std::sort(v.begin(), v.end());
  return static_cast<double>(std::unique(v.begin(), v.end()) - v.begin());
}

}  // namespace

FeatureVector featurize_recent(std::span<const CeEvent> recent, std::optional<Timestamp> first_ce,
                               const DimmMeta& meta, Timestamp t, const FeatureSchema& schema) {
  const auto& cfg = schema.config();
  const auto visible = recent.first(first_after(recent, t));

  FeatureVector out;
  auto& v = out.values;
  v.reserve(schema.size());

  auto window_sum = [&](Millis w) {
    std::int64_t n = 0;
    for (const auto& e : visible.subspan(first_after(visible, t - w))) n += e.count;
    return n;
  };

  for (auto w : cfg.sub_windows) v.push_back(static_cast<double>(window_sum(w)));

  const Millis obs = cfg.window.observation;
  const std::int64_t obs_count = window_sum(obs);
  double rate = 0.0;
  if (obs_count > 0 && first_ce) {
    const Millis observed = std::min(obs, (t - *first_ce) + cfg.window.sample_interval);
    rate = static_cast<double>(obs_count) * static_cast<double>(days(1).count()) / static_cast<double>(observed.count());
  }
  v.push_back(rate);

  const auto analysis = visible.subspan(first_after(visible, t - cfg.thresholds.analysis_window));
  {
    std::vector<std::pair<int, int>> devices;
    std::vector<std::tuple<int, int, int, int>> banks;
    std::vector<std::tuple<int, int, int, int, std::int64_t>> rows;
    std::vector<std::tuple<int, int, int, int, std::int64_t>> columns;
    std::vector<CellAddress> cells;
    for (const auto& e : analysis) {
      const auto& c = e.cell;
      devices.emplace_back(c.rank, c.device);
      banks.emplace_back(c.rank, c.device, c.bank_group, c.bank);
      rows.emplace_back(c.rank, c.device, c.bank_group, c.bank, c.row);
      columns.emplace_back(c.rank, c.device, c.bank_group, c.bank, c.column);
      cells.push_back(c);
    }
    v.push_back(distinct_count(devices));
    v.push_back(distinct_count(banks));
    v.push_back(distinct_count(rows));
    v.push_back(distinct_count(columns));
    v.push_back(distinct_count(cells));
  }

  const auto diag = classify_faults(analysis, cfg.thresholds);
  v.push_back(diag.cell_faults);
  v.push_back(diag.row_faults);
  v.push_back(diag.column_faults);
  v.push_back(diag.bank_faults);
  v.push_back(diag.device_scope == DeviceScope::single_device ? 1.0 : 0.0);
  v.push_back(diag.device_scope == DeviceScope::multi_device ? 1.0 : 0.0);

  const auto agg = aggregate_bit_patterns(analysis, TimeRange::all(), cfg.interval_mode);
  int max_dq = 0;
  int max_beat = 0;
  for (const auto& e : analysis) {
    const auto s = bit_pattern_stats(e.bitmap, cfg.interval_mode);
    max_dq = std::max(max_dq, s.dq_count);
    max_beat = std::max(max_beat, s.beat_count);
  }
  v.push_back(agg.dq_count);
  v.push_back(agg.beat_count);
  v.push_back(agg.dq_interval);
  v.push_back(agg.beat_interval);
  v.push_back(max_dq);
  v.push_back(max_beat);

  v.push_back(window_sum(cfg.storm_window) >= cfg.storm_threshold ? 1.0 : 0.0);

  v.push_back(dq_width(meta.data_width));
  v.push_back(meta.frequency);

  auto one_hot = [&](const std::vector<std::string>& known, const std::string& value) {
    bool hit = false;
    for (const auto& k : known) {
      const bool match = k == value;
      hit = hit || match;
      v.push_back(match ? 1.0 : 0.0);
    }
    v.push_back(hit ? 0.0 : 1.0);
    return hit;
  };
  const bool known_manufacturer = one_hot(cfg.categories.manufacturers, meta.manufacturer);
  const bool known_process = one_hot(cfg.categories.chip_processes, meta.chip_process);
  out.unknown_category = !known_manufacturer || !known_process;
  for (auto p : kPlatforms) v.push_back(meta.platform == p ? 1.0 : 0.0);

  return out;
}

FeatureVector featurize(std::span<const CeEvent> history, const DimmMeta& meta, Timestamp t,
                        const FeatureSchema& schema) {
  std::optional<Timestamp> first;
  if (!history.empty() && history.front().timestamp <= t) first = history.front().timestamp;
  return featurize_recent(history, first, meta, t, schema);
}

namespace {

struct DimmSamples {
  std::vector<Sample> samples;
  bool unknown_category = false;
};

DimmSamples batch_dimm(const ValidatedTrace& trace, const DimmId& dimm, Timestamp trace_end,
                       const FeatureSchema& schema) {
  DimmSamples out;
  const auto ces = trace.ces_of(dimm);
  if (ces.empty()) return out;
  const auto* meta = trace.meta_of(dimm);
  if (meta == nullptr) throw Error(ErrorCode::missing_meta, dimm.to_string());
  const auto ues = trace.ues_of(dimm);
  std::vector<Timestamp> ue_times;
  for (const auto& u : ues) ue_times.push_back(u.timestamp);
  const Timestamp stop = ue_times.empty() ? trace_end : std::min(trace_end, ue_times.front());
  const auto& window = schema.config().window;
  for (Timestamp t = ces.front().timestamp; t < stop; t += window.prediction_interval) {
    auto fv = featurize(ces, *meta, t, schema);
    out.unknown_category = out.unknown_category || fv.unknown_category;
    out.samples.push_back({dimm, t, std::move(fv.values), label(t, ue_times, window)});
  }
  return out;
}

SampleSet build_batch(const ValidatedTrace& trace, const FeatureSchema& schema, int threads) {
  SampleSet out;
  const auto end = trace.last_timestamp();
  if (!end) return out;
  const auto dimms = trace.dimms();
  std::vector<DimmSamples> per_dimm(dimms.size());
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, dimms.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < dimms.size(); ++i) per_dimm[i] = batch_dimm(trace, dimms[i], *end, schema);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < dimms.size(); i += workers) per_dimm[i] = batch_dimm(trace, dimms[i], *end, schema);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  for (std::size_t i = 0; i < dimms.size(); ++i) {
    if (per_dimm[i].unknown_category) out.unknown_category_dimms.push_back(dimms[i]);
    for (auto& s : per_dimm[i].samples) out.samples.push_back(std::move(s));
  }
  return out;
}

SampleSet build_stream(const ValidatedTrace& trace, const FeatureSchema& schema) {
  StreamFeaturizer stream(schema, trace.meta());
  // Replay the trace in arrival order: by timestamp, CEs before UEs.
  std::vector<const CeEvent*> ces;
  ces.reserve(trace.ces().size());
  for (const auto& e : trace.ces()) ces.push_back(&e);
  std::stable_sort(ces.begin(), ces.end(),
                   [](const CeEvent* a, const CeEvent* b) { return a->timestamp < b->timestamp; });
  std::vector<const UeEvent*> ues;
  for (const auto& e : trace.ues()) ues.push_back(&e);
  std::stable_sort(ues.begin(), ues.end(),
                   [](const UeEvent* a, const UeEvent* b) { return a->timestamp < b->timestamp; });
  std::size_t i = 0;
  std::size_t k = 0;
  while (i < ces.size() || k < ues.size()) {
    if (k == ues.size() || (i < ces.size() && ces[i]->timestamp <= ues[k]->timestamp)) {
      stream.push(*ces[i++]);
    } else {
      stream.push(*ues[k++]);
    }
  }
  return stream.finish();
}

}  // namespace

SampleSet build_samples(const ValidatedTrace& trace, const FeatureSchema& schema, SampleMode mode, int threads) {
  return mode == SampleMode::batch ? build_batch(trace, schema, threads) : build_stream(trace, schema);
}

StreamFeaturizer::StreamFeaturizer(const FeatureSchema& schema, std::map<DimmId, DimmMeta> meta)
    : schema_(schema), meta_(std::move(meta)) {}

void StreamFeaturizer::schedule(const DimmId& dimm, const DimmState& state) {
  if (state.next_tick) ticks_.emplace(*state.next_tick, dimm);
}

void StreamFeaturizer::advance(Timestamp ts) {
  if (watermark_ && ts < *watermark_) {
    throw Error(ErrorCode::malformed_record, "stream events must arrive in timestamp order");
  }
  const auto& window = schema_.config().window;
  // Emit every tick strictly before the new event time.
  while (!ticks_.empty() && ticks_.top().first < ts) {
    auto [t, dimm] = ticks_.top();
    ticks_.pop();
    auto& st = states_.at(dimm);
    if (!st.next_tick || *st.next_tick != t) continue;  // stale entry
    if (st.first_ue && t >= *st.first_ue) {
      st.next_tick.reset();
      continue;
    }
    const auto& meta = meta_.at(dimm);
    auto fv = featurize_recent(st.recent, st.first_ce, meta, t, schema_);
    st.unknown_category = st.unknown_category || fv.unknown_category;
    pending_.push_back({dimm, t, std::move(fv.values)});
    st.next_tick = t + window.prediction_interval;
    schedule(dimm, st);
  }
  watermark_ = ts;
}

void StreamFeaturizer::push(const CeEvent& e) {
  advance(e.timestamp);
  if (!meta_.count(e.dimm)) throw Error(ErrorCode::missing_meta, e.dimm.to_string());
  auto& st = states_[e.dimm];
  if (!st.first_ce) {
    st.first_ce = e.timestamp;
    if (!st.first_ue) {
      st.next_tick = e.timestamp;
      schedule(e.dimm, st);
    }
  }
  st.recent.push_back(e);
  const Timestamp horizon = e.timestamp - schema_.max_lookback();
  const auto keep = std::find_if(st.recent.begin(), st.recent.end(),
                                 [&](const CeEvent& x) { return x.timestamp > horizon; });
  st.recent.erase(st.recent.begin(), keep);
}

void StreamFeaturizer::push(const UeEvent& e) {
  advance(e.timestamp);
  auto& st = states_[e.dimm];
  st.ue_times.push_back(e.timestamp);
  if (!st.first_ue) st.first_ue = e.timestamp;
}

Sample StreamFeaturizer::finalize(Pending&& p) const {
  const auto& st = states_.at(p.dimm);
  return {p.dimm, p.t, std::move(p.features), label(p.t, st.ue_times, schema_.config().window)};
}

std::vector<Sample> StreamFeaturizer::drain_ready() {
  std::vector<Sample> out;
  if (!watermark_) return out;
  const auto& window = schema_.config().window;
  // Pending entries are appended in tick order per DIMM but interleaved
  // across DIMMs; a prefix scan stops at the first immature entry.
  while (ready_begin_ < pending_.size() && pending_[ready_begin_].t + window.lead + window.prediction < *watermark_) {
    out.push_back(finalize(std::move(pending_[ready_begin_])));
    ++ready_begin_;
  }
  if (ready_begin_ == pending_.size()) {
    pending_.clear();
    ready_begin_ = 0;
  }
  return out;
}

SampleSet StreamFeaturizer::finish() {
  SampleSet out;
  for (auto& s : drain_ready()) finished_.push_back(std::move(s));
  for (std::size_t i = ready_begin_; i < pending_.size(); ++i) finished_.push_back(finalize(std::move(pending_[i])));
  pending_.clear();
  ready_begin_ = 0;
  out.samples = std::move(finished_);
  finished_.clear();
  std::stable_sort(out.samples.begin(), out.samples.end(),
                   [](const Sample& a, const Sample& b) { return std::tie(a.dimm, a.t) < std::tie(b.dimm, b.t); });
  for (const auto& [dimm, st] : states_) {
    if (st.unknown_category) out.unknown_category_dimms.push_back(dimm);
  }
  return out;
}

void write_feature_csv(std::ostream& os, const FeatureSchema& schema, std::span<const Sample> samples) {
  os << "# schema_hash=" << schema.hash() << '\n';
  os << "server,socket,channel,slot,t";
  for (const auto& f : schema.features()) os << ',' << f.name;
  os << ",label\n";
  fmt::memory_buffer buf;
  for (const auto& s : samples) {
    if (s.features.size() != schema.size()) throw Error(ErrorCode::schema_mismatch, "sample width != schema");
    buf.clear();
    fmt::format_to(std::back_inserter(buf), "{},{},{},{},{}", s.dimm.server_id, s.dimm.socket, s.dimm.channel,
                   s.dimm.slot, epoch_ms(s.t));
    for (double x : s.features) fmt::format_to(std::back_inserter(buf), ",{}", x);
    fmt::format_to(std::back_inserter(buf), ",{}\n", static_cast<int>(s.label));
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
}

namespace {

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view s, std::size_t line_no) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::malformed_record, fmt::format("feature matrix line {}: bad number '{}'", line_no, s));
  }
  return v;
}

}  // namespace

FeatureMatrix read_feature_csv(std::istream& is) {
  FeatureMatrix m;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(is, line)) throw Error(ErrorCode::malformed_record, "empty feature matrix");
  ++line_no;
  constexpr std::string_view kPrefix = "# schema_hash=";
  if (line.rfind(kPrefix, 0) != 0) throw Error(ErrorCode::schema_mismatch, "feature matrix lacks schema hash");
  m.schema_hash = line.substr(kPrefix.size());
  if (!std::getline(is, line)) throw Error(ErrorCode::malformed_record, "feature matrix lacks header");
  ++line_no;
  const auto header = split(line, ',');
  if (header.size() < 6 || header[0] != "server" || header[4] != "t" || header.back() != "label") {
    throw Error(ErrorCode::malformed_record, "unexpected feature matrix header");
  }
  for (std::size_t i = 5; i + 1 < header.size(); ++i) m.feature_names.emplace_back(header[i]);
  const std::size_t width = m.feature_names.size();
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != width + 6) {
      throw Error(ErrorCode::malformed_record, fmt::format("feature matrix line {}: wrong field count", line_no));
    }
    Sample s;
    s.dimm.server_id = std::string(cells[0]);
    s.dimm.socket = parse_number<int>(cells[1], line_no);
    s.dimm.channel = parse_number<int>(cells[2], line_no);
    s.dimm.slot = parse_number<int>(cells[3], line_no);
    s.t = from_epoch_ms(parse_number<std::int64_t>(cells[4], line_no));
    s.features.reserve(width);
    for (std::size_t i = 0; i < width; ++i) s.features.push_back(parse_number<double>(cells[5 + i], line_no));
    const int lab = parse_number<int>(cells.back(), line_no);
    if (lab != 0 && lab != 1) throw Error(ErrorCode::malformed_record, "label must be 0 or 1");
    s.label = static_cast<Label>(lab);
    m.samples.push_back(std::move(s));
  }
  return m;
}

}  // namespace memfail
