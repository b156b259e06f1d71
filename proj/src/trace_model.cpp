#include "memfail/trace_model.hpp"

#include <algorithm>
#include <bit>
#include <tuple>

#include <fmt/format.h>

namespace memfail {

std::string DimmId::to_string() const {
  return fmt::format("{}/{}/{}/{}", server_id, socket, channel, slot);
}

std::string_view to_string(DataWidth w) { return w == DataWidth::x4 ? "x4" : "x8"; }

std::optional<DataWidth> parse_data_width(std::string_view s) {
  if (s == "x4") return DataWidth::x4;
  if (s == "x8") return DataWidth::x8;
  return std::nullopt;
}

std::string_view to_string(Platform p) {
  switch (p) {
    case Platform::purley: return "purley";
    case Platform::whitley: return "whitley";
    case Platform::k920: return "k920";
    case Platform::custom: return "custom";
  }
  return "custom";
}

std::optional<Platform> parse_platform(std::string_view s) {
  if (s == "purley") return Platform::purley;
  if (s == "whitley") return Platform::whitley;
  if (s == "k920") return Platform::k920;
  if (s == "custom") return Platform::custom;
  return std::nullopt;
}

int ErrorBitmap::popcount() const { return std::popcount(word()); }

bool ErrorBitmap::fits_width(int width) const {
  const auto allowed = static_cast<std::uint8_t>((1u << width) - 1u);
  return std::all_of(beats_.begin(), beats_.end(),
                     [allowed](std::uint8_t m) { return (m & ~allowed) == 0; });
}

std::string ErrorBitmap::to_hex() const { return fmt::format("{:016x}", word()); }

void WindowConfig::validate() const {
  auto positive = [](Millis d, const char* name) {
    if (d.count() <= 0) throw Error(ErrorCode::config, fmt::format("{} must be positive", name));
  };
  positive(observation, "observation window");
  positive(lead, "lead time");
  positive(prediction, "prediction window");
  positive(sample_interval, "sample interval");
  positive(prediction_interval, "prediction interval");
  if (lead > hours(3)) throw Error(ErrorCode::config, "lead time must not exceed 3 h");
  if (sample_interval > prediction_interval) {
    throw Error(ErrorCode::config, "sample interval must not exceed prediction interval");
  }
}

bool ce_less(const CeEvent& a, const CeEvent& b) {
  return std::tie(a.dimm, a.timestamp, a.cell, a.bitmap, a.count) <
         std::tie(b.dimm, b.timestamp, b.cell, b.bitmap, b.count);
}

bool ue_less(const UeEvent& a, const UeEvent& b) {
  return std::tie(a.dimm, a.timestamp, a.cell) < std::tie(b.dimm, b.timestamp, b.cell);
}

std::span<const CeEvent> ValidatedTrace::ces_of(const DimmId& dimm) const {
  auto it = ce_index_.find(dimm);
  if (it == ce_index_.end()) return {};
  return std::span<const CeEvent>(ces_).subspan(it->second.first, it->second.second - it->second.first);
}

std::span<const UeEvent> ValidatedTrace::ues_of(const DimmId& dimm) const {
  auto it = ue_index_.find(dimm);
  if (it == ue_index_.end()) return {};
  return std::span<const UeEvent>(ues_).subspan(it->second.first, it->second.second - it->second.first);
}

const DimmMeta* ValidatedTrace::meta_of(const DimmId& dimm) const {
  auto it = meta_.find(dimm);
  return it == meta_.end() ? nullptr : &it->second;
}

std::vector<DimmId> ValidatedTrace::dimms() const {
  std::vector<DimmId> out;
  auto a = ce_index_.begin();
  auto b = ue_index_.begin();
  while (a != ce_index_.end() || b != ue_index_.end()) {
    if (b == ue_index_.end() || (a != ce_index_.end() && a->first < b->first)) {
      out.push_back((a++)->first);
    } else if (a == ce_index_.end() || b->first < a->first) {
      out.push_back((b++)->first);
    } else {
      out.push_back(a->first);
      ++a;
      ++b;
    }
  }
  return out;
}

std::vector<DimmId> ValidatedTrace::ue_dimms() const {
  std::vector<DimmId> out;
  out.reserve(ue_index_.size());
  for (const auto& [dimm, range] : ue_index_) out.push_back(dimm);
  return out;
}

std::optional<Timestamp> ValidatedTrace::first_timestamp() const {
  std::optional<Timestamp> t;
  for (const auto& e : ces_) t = t ? std::min(*t, e.timestamp) : e.timestamp;
  for (const auto& e : ues_) t = t ? std::min(*t, e.timestamp) : e.timestamp;
  return t;
}

std::optional<Timestamp> ValidatedTrace::last_timestamp() const {
  std::optional<Timestamp> t;
  for (const auto& e : ces_) t = t ? std::max(*t, e.timestamp) : e.timestamp;
  for (const auto& e : ues_) t = t ? std::max(*t, e.timestamp) : e.timestamp;
  return t;
}

void ValidatedTrace::build_index() {
  ce_index_.clear();
  ue_index_.clear();
  for (std::size_t i = 0; i < ces_.size();) {
    std::size_t j = i;
    while (j < ces_.size() && ces_[j].dimm == ces_[i].dimm) ++j;
    ce_index_.emplace(ces_[i].dimm, Range{i, j});
    i = j;
  }
  for (std::size_t i = 0; i < ues_.size();) {
    std::size_t j = i;
    while (j < ues_.size() && ues_[j].dimm == ues_[i].dimm) ++j;
    ue_index_.emplace(ues_[i].dimm, Range{i, j});
    i = j;
  }
}

namespace {

void reject(ValidationSummary& summary, const ValidateOptions& options, ErrorCode code, const DimmId& dimm,
            Timestamp ts, std::string detail) {
  if (options.strict) {
    throw Error(code, fmt::format("{} at {}: {}", dimm.to_string(), epoch_ms(ts), detail));
  }
  summary.issues.push_back({code, dimm, ts, std::move(detail)});
}

// Sets every UE's sudden flag from the CE history of its DIMM; both inputs
// sorted by (dimm, timestamp).
std::size_t recompute_sudden(const std::vector<CeEvent>& ces, std::vector<UeEvent>& ues) {
  std::size_t changed = 0;
  std::size_t c = 0;
  for (auto& ue : ues) {
    while (c < ces.size() && ces[c].dimm < ue.dimm) ++c;
    const bool has_prior = c < ces.size() && ces[c].dimm == ue.dimm && ces[c].timestamp < ue.timestamp;
    if (ue.sudden != !has_prior) ++changed;
    ue.sudden = !has_prior;
  }
  return changed;
}

}  // namespace

ValidatedTrace validate_trace(EventLog events, std::span<const DimmMeta> meta, const ValidateOptions& options) {
  ValidatedTrace out;
  auto& summary = out.summary_;
  summary.input_ces = events.ces.size();
  summary.input_ues = events.ues.size();

  for (const auto& m : meta) out.meta_.insert_or_assign(m.dimm, m);

  out.ces_.reserve(events.ces.size());
  for (auto& ce : events.ces) {
    const auto* m = out.meta_of(ce.dimm);
    if (m == nullptr) {
      ++summary.rejected_ces;
      reject(summary, options, ErrorCode::missing_meta, ce.dimm, ce.timestamp, "no DIMM metadata");
      continue;
    }
    if (ce.bitmap.empty() || !ce.bitmap.fits_width(dq_width(m->data_width))) {
      ++summary.rejected_ces;
      reject(summary, options, ErrorCode::malformed_bitmap, ce.dimm, ce.timestamp,
             fmt::format("bitmap {} invalid for {}", ce.bitmap.to_hex(), to_string(m->data_width)));
      continue;
    }
    if (ce.count < 1) {
      ++summary.rejected_ces;
      reject(summary, options, ErrorCode::malformed_record, ce.dimm, ce.timestamp, "count < 1");
      continue;
    }
    out.ces_.push_back(std::move(ce));
  }
  out.ues_.reserve(events.ues.size());
  for (auto& ue : events.ues) {
    if (out.meta_of(ue.dimm) == nullptr) {
      ++summary.rejected_ues;
      reject(summary, options, ErrorCode::missing_meta, ue.dimm, ue.timestamp, "no DIMM metadata");
      continue;
    }
    out.ues_.push_back(std::move(ue));
  }

  std::sort(out.ces_.begin(), out.ces_.end(), ce_less);
  std::sort(out.ues_.begin(), out.ues_.end(), ue_less);
  summary.sudden_flags_changed = recompute_sudden(out.ces_, out.ues_);
  out.build_index();
  return out;
}

ValidatedTrace filter_predictable_population(const ValidatedTrace& trace) {
  ValidatedTrace out;
  out.summary_ = trace.summary_;
  std::size_t dropped = 0;
  for (const auto& [dimm, meta] : trace.meta_) {
    const auto ces = trace.ces_of(dimm);
    const auto ues = trace.ues_of(dimm);
    const bool keep = !ces.empty() && (ues.empty() || !ues.front().sudden);
    if (!keep) {
      ++dropped;
      continue;
    }
    out.meta_.emplace(dimm, meta);
    out.ces_.insert(out.ces_.end(), ces.begin(), ces.end());
    out.ues_.insert(out.ues_.end(), ues.begin(), ues.end());
  }
  out.summary_.dropped_dimms += dropped;
  out.build_index();
  return out;
}

}  // namespace memfail
