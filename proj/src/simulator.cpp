#include "memfail/simulator.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "memfail/hash.hpp"
#include "memfail/random.hpp"

namespace memfail {

using nlohmann::json;

std::string_view to_string(InjectedMode m) {
  switch (m) {
    case InjectedMode::cell: return "cell";
    case InjectedMode::row: return "row";
    case InjectedMode::column: return "column";
    case InjectedMode::bank: return "bank";
  }
  return "cell";
}

FaultMode as_fault_mode(InjectedMode m) {
  switch (m) {
    case InjectedMode::cell: return FaultMode::cell;
    case InjectedMode::row: return FaultMode::row;
    case InjectedMode::column: return FaultMode::column;
    case InjectedMode::bank: return FaultMode::bank;
  }
  return FaultMode::cell;
}

std::string_view to_string(DimmCategory c) {
  switch (c) {
    case DimmCategory::healthy: return "healthy";
    case DimmCategory::faulty: return "faulty";
    case DimmCategory::sudden: return "sudden";
  }
  return "healthy";
}

namespace {

void check(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::invalid_profile, what);
}

bool unit(double p) { return p >= 0.0 && p <= 1.0; }

void check_patterns(const std::vector<PatternSpec>& patterns, int width, const char* which) {
  check(!patterns.empty(), fmt::format("{} pattern list is empty", which));
  for (const auto& p : patterns) {
    check(p.weight > 0.0 && std::isfinite(p.weight), fmt::format("{} pattern weight must be positive", which));
    check(p.dq_count >= 1 && p.dq_count <= width, fmt::format("{} pattern dq_count out of range", which));
    check(p.beat_count >= 1 && p.beat_count <= 8, fmt::format("{} pattern beat_count out of range", which));
    check(p.beat_interval >= 0 && p.beat_interval <= 7, fmt::format("{} pattern beat_interval out of range", which));
    check(p.beat_count == 1 ? p.beat_interval == 0 : p.beat_interval >= p.beat_count - 1,
          fmt::format("{} pattern beats do not fit the interval", which));
  }
}

double mix_sum(const std::array<double, 4>& a) { return a[0] + a[1] + a[2] + a[3]; }

}  // namespace

void PlatformProfile::validate() const {
  check(unit(predictable_ue_fraction), "predictable_ue_fraction must lie in [0, 1]");
  check(unit(faulty_fraction), "faulty_fraction must lie in [0, 1]");
  for (double p : fault_mode_mix) check(unit(p), "fault_mode_mix entries must lie in [0, 1]");
  check(std::abs(mix_sum(fault_mode_mix) - 1.0) < 1e-9, "fault_mode_mix must sum to 1");
  check(unit(single_device_share), "single_device_share must lie in [0, 1]");
  for (double h : ue_hazard) check(unit(h), "ue_hazard entries must lie in [0, 1]");
  check(single_device_factor >= 0.0 && multi_device_factor >= 0.0, "scope hazard factors must be >= 0");
  check(unit(decoy_fraction), "decoy_fraction must lie in [0, 1]");
  check(unit(full_signature_share), "full_signature_share must lie in [0, 1]");
  check(ce_rate > 0.0 && degrading_ce_rate > 0.0 && background_ce_rate > 0.0, "CE rates must be positive");
  const int width = dq_width(data_width);
  check_patterns(risky_patterns, width, "risky");
  check_patterns(benign_patterns, width, "benign");
}

double PlatformProfile::degrading_probability() const {
  double q = 0.0;
  for (std::size_t m = 0; m < 4; ++m) {
    const double single = std::min(1.0, ue_hazard[m] * single_device_factor);
    const double multi = std::min(1.0, ue_hazard[m] * multi_device_factor);
    q += fault_mode_mix[m] * (single_device_share * single + (1.0 - single_device_share) * multi);
  }
  return faulty_fraction * q;
}

double PlatformProfile::sudden_probability() const {
  const double q = degrading_probability();
  const double f = predictable_ue_fraction;
  const double denom = f + (1.0 - f) * q;
  return denom > 0.0 ? (1.0 - f) * q / denom : 0.0;
}

namespace {

json patterns_to_json(const std::vector<PatternSpec>& ps) {
  json out = json::array();
  for (const auto& p : ps) {
    out.push_back({{"dq_count", p.dq_count},
                   {"beat_count", p.beat_count},
                   {"beat_interval", p.beat_interval},
                   {"weight", p.weight}});
  }
  return out;
}

std::vector<PatternSpec> patterns_from_json(const json& j) {
  std::vector<PatternSpec> out;
  for (const auto& p : j) {
    out.push_back({p.at("dq_count").get<int>(), p.at("beat_count").get<int>(), p.at("beat_interval").get<int>(),
                   p.value("weight", 1.0)});
  }
  return out;
}

json mode_array(const std::array<double, 4>& a) {
  json out = json::object();
  for (auto m : kInjectedModes) out[std::string(to_string(m))] = a[static_cast<std::size_t>(m)];
  return out;
}

void mode_array_from(const json& j, std::array<double, 4>& a) {
  for (auto m : kInjectedModes) {
    const std::string key(to_string(m));
    if (j.contains(key)) a[static_cast<std::size_t>(m)] = j.at(key).get<double>();
  }
}

}  // namespace

json PlatformProfile::to_json() const {
  return {{"name", name},
          {"platform", std::string(memfail::to_string(platform))},
          {"data_width", std::string(memfail::to_string(data_width))},
          {"predictable_ue_fraction", predictable_ue_fraction},
          {"faulty_fraction", faulty_fraction},
          {"fault_mode_mix", mode_array(fault_mode_mix)},
          {"single_device_share", single_device_share},
          {"ue_hazard", mode_array(ue_hazard)},
          {"single_device_factor", single_device_factor},
          {"multi_device_factor", multi_device_factor},
          {"risky_patterns", patterns_to_json(risky_patterns)},
          {"benign_patterns", patterns_to_json(benign_patterns)},
          {"decoy_fraction", decoy_fraction},
          {"ce_rate", ce_rate},
          {"degrading_ce_rate", degrading_ce_rate},
          {"background_ce_rate", background_ce_rate},
          {"full_signature_share", full_signature_share}};
}

PlatformProfile PlatformProfile::from_json(const json& j, const PlatformProfile& base) {
  PlatformProfile p = base;
  try {
    p.name = j.value("name", p.name);
    if (j.contains("platform")) {
      const auto plat = parse_platform(j.at("platform").get<std::string>());
      check(plat.has_value(), "unknown platform");
      p.platform = *plat;
    }
    if (j.contains("data_width")) {
      const auto w = parse_data_width(j.at("data_width").get<std::string>());
      check(w.has_value(), "unknown data width");
      p.data_width = *w;
    }
    p.predictable_ue_fraction = j.value("predictable_ue_fraction", p.predictable_ue_fraction);
    p.faulty_fraction = j.value("faulty_fraction", p.faulty_fraction);
    if (j.contains("fault_mode_mix")) mode_array_from(j.at("fault_mode_mix"), p.fault_mode_mix);
    p.single_device_share = j.value("single_device_share", p.single_device_share);
    if (j.contains("ue_hazard")) mode_array_from(j.at("ue_hazard"), p.ue_hazard);
    p.single_device_factor = j.value("single_device_factor", p.single_device_factor);
    p.multi_device_factor = j.value("multi_device_factor", p.multi_device_factor);
    if (j.contains("risky_patterns")) p.risky_patterns = patterns_from_json(j.at("risky_patterns"));
    if (j.contains("benign_patterns")) p.benign_patterns = patterns_from_json(j.at("benign_patterns"));
    p.decoy_fraction = j.value("decoy_fraction", p.decoy_fraction);
    p.ce_rate = j.value("ce_rate", p.ce_rate);
    p.degrading_ce_rate = j.value("degrading_ce_rate", p.degrading_ce_rate);
    p.background_ce_rate = j.value("background_ce_rate", p.background_ce_rate);
    p.full_signature_share = j.value("full_signature_share", p.full_signature_share);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::invalid_profile, std::string("profile: ") + e.what());
  }
  p.validate();
  return p;
}

namespace {

std::vector<PatternSpec> benign_defaults() {
  return {{1, 1, 0, 3.0}, {1, 2, 1, 2.0}, {2, 2, 1, 2.0}, {2, 3, 2, 1.0}, {1, 2, 2, 1.0}};
}

}  // namespace

std::vector<PlatformProfile> builtin_profiles() {
  PlatformProfile purley;
  purley.name = "purley";
  purley.platform = Platform::purley;
  purley.predictable_ue_fraction = 0.73;
  purley.fault_mode_mix = {0.40, 0.25, 0.20, 0.15};
  purley.single_device_share = 0.6;
  purley.ue_hazard = {0.03, 0.50, 0.30, 0.70};
  purley.single_device_factor = 1.0;
  purley.multi_device_factor = 0.25;
  purley.risky_patterns = {{2, 2, 4, 1.0}};
  purley.benign_patterns = benign_defaults();

  PlatformProfile whitley = purley;
  whitley.name = "whitley";
  whitley.platform = Platform::whitley;
  whitley.predictable_ue_fraction = 0.42;
  whitley.fault_mode_mix = {0.35, 0.25, 0.20, 0.20};
  whitley.single_device_share = 0.5;
  whitley.ue_hazard = {0.03, 0.45, 0.30, 0.60};
  whitley.single_device_factor = 0.4;
  whitley.multi_device_factor = 1.0;
  whitley.risky_patterns = {{4, 5, 6, 1.0}};

  PlatformProfile k920 = purley;
  k920.name = "k920";
  k920.platform = Platform::k920;
  k920.predictable_ue_fraction = 0.82;
  k920.single_device_share = 0.4;
  k920.single_device_factor = 0.2;
  k920.multi_device_factor = 1.0;
  k920.risky_patterns = {{3, 3, 6, 1.0}};

  return {purley, whitley, k920};
}

PlatformProfile builtin_profile(std::string_view name) {
  for (auto& p : builtin_profiles()) {
    if (p.name == name) return p;
  }
  throw Error(ErrorCode::invalid_profile, fmt::format("unknown profile '{}'", name));
}

json GroundTruth::to_json() const {
  json dimms_json = json::array();
  for (const auto& d : dimms) {
    json e = {{"dimm", d.dimm.to_string()},
              {"category", std::string(memfail::to_string(d.category))},
              {"mode", d.mode ? json(std::string(memfail::to_string(*d.mode))) : json(nullptr)},
              {"scope", std::string(memfail::to_string(d.scope))},
              {"devices", d.devices},
              {"degrading", d.degrading},
              {"decoy", d.decoy},
              {"risky_signature", d.risky_signature},
              {"signature", d.signature ? json(d.signature->to_hex()) : json(nullptr)},
              {"onset_ms", d.onset ? json(epoch_ms(*d.onset)) : json(nullptr)},
              {"ue_ms", d.ue_time ? json(epoch_ms(*d.ue_time)) : json(nullptr)},
              {"sudden_ue", d.sudden_ue}};
    dimms_json.push_back(std::move(e));
  }
  return {{"profile", profile}, {"seed", seed}, {"dimms", dimms_json}};
}

DimmId simulated_dimm_id(std::size_t index) {
  return {fmt::format("srv-{:05d}", index / 8), static_cast<int>((index % 8) / 4), static_cast<int>(index % 4), 0};
}

namespace {

constexpr std::int64_t kMinuteMs = 60'000;
constexpr int kRows = 65536;
constexpr int kColumns = 1024;

const PatternSpec& pick_pattern(const std::vector<PatternSpec>& ps, Rng& rng) {
  double total = 0.0;
  for (const auto& p : ps) total += p.weight;
  double u = rng.uniform() * total;
  for (const auto& p : ps) {
    if (u < p.weight) return p;
    u -= p.weight;
  }
  return ps.back();
}

ErrorBitmap build_signature(const PatternSpec& spec, int width, Rng& rng) {
  std::vector<int> beats;
  const int first = static_cast<int>(rng.range(0, 7 - spec.beat_interval));
  beats.push_back(first);
  if (spec.beat_count > 1) {
    std::vector<int> interior;
    for (int b = first + 1; b < first + spec.beat_interval; ++b) interior.push_back(b);
    for (int k = 0; k < spec.beat_count - 2; ++k) {
      const auto j = k + static_cast<int>(rng.index(interior.size() - k));
      std::swap(interior[k], interior[j]);
      beats.push_back(interior[k]);
    }
    beats.push_back(first + spec.beat_interval);
  }
  std::vector<int> dqs(width);
  for (int d = 0; d < width; ++d) dqs[d] = d;
  for (int k = 0; k < spec.dq_count; ++k) {
    const auto j = k + static_cast<int>(rng.index(width - k));
    std::swap(dqs[k], dqs[j]);
  }
  dqs.resize(spec.dq_count);
  ErrorBitmap bm;
  const int n = std::max(spec.dq_count, spec.beat_count);
  for (int k = 0; k < n; ++k) bm.set(beats[k % spec.beat_count], dqs[k % spec.dq_count]);
  return bm;
}

ErrorBitmap one_bit_of(const ErrorBitmap& sig, Rng& rng) {
  std::vector<std::pair<int, int>> bits;
  for (int b = 0; b < ErrorBitmap::kBeats; ++b) {
    for (int d = 0; d < 8; ++d) {
      if (sig.test(b, d)) bits.emplace_back(b, d);
    }
  }
  const auto [b, d] = bits[rng.index(bits.size())];
  ErrorBitmap out;
  out.set(b, d);
  return out;
}

CellAddress random_cell(Rng& rng, int devices) {
  CellAddress c;
  c.rank = static_cast<int>(rng.index(2));
  c.device = static_cast<int>(rng.index(devices));
  c.bank_group = static_cast<int>(rng.index(4));
  c.bank = static_cast<int>(rng.index(4));
  c.row = static_cast<std::int64_t>(rng.index(kRows));
  c.column = static_cast<std::int64_t>(rng.index(kColumns));
  return c;
}

std::int64_t other_than(std::int64_t v, std::int64_t n, Rng& rng) {
  std::int64_t x = static_cast<std::int64_t>(rng.index(n - 1));
  return x >= v ? x + 1 : x;
}

class DimmGenerator {
 public:
  DimmGenerator(const PlatformProfile& profile, std::int64_t duration_min, Rng& rng, EventLog& out)
      : p_(profile), dur_(duration_min), rng_(rng), out_(out), width_(dq_width(profile.data_width)),
        devices_(devices_per_rank(profile.data_width)) {}

  DimmTruth run(const DimmId& dimm) {
    DimmTruth t;
    t.dimm = dimm;
    dimm_ = dimm;
    if (rng_.bernoulli(p_.sudden_probability())) {
      sudden(t);
    } else if (rng_.bernoulli(p_.faulty_fraction)) {
      faulty(t);
    } else {
      healthy(t);
    }
    return t;
  }

 private:
  Timestamp at(std::int64_t minute) const { return from_epoch_ms(kSimulationEpochMs + minute * kMinuteMs); }

  void emit(std::int64_t minute, const CellAddress& cell, const ErrorBitmap& bm, int count = 1) {
    out_.ces.push_back({at(minute), dimm_, cell, bm, count});
  }

  void sudden(DimmTruth& t) {
    t.category = DimmCategory::sudden;
    const auto minute = static_cast<std::int64_t>(rng_.index(dur_));
    t.ue_time = at(minute);
    t.sudden_ue = true;
    out_.ues.push_back({*t.ue_time, dimm_, random_cell(rng_, devices_), true});
  }

  void healthy(DimmTruth& t) {
    t.category = DimmCategory::healthy;
    double minute = static_cast<double>(rng_.index(dur_));
    while (minute < static_cast<double>(dur_)) {
      ErrorBitmap bm;
      bm.set(static_cast<int>(rng_.index(ErrorBitmap::kBeats)), static_cast<int>(rng_.index(width_)));
      emit(static_cast<std::int64_t>(minute), random_cell(rng_, devices_), bm);
      minute += rng_.exponential(p_.background_ce_rate) * 1440.0;
    }
  }

  void faulty(DimmTruth& t) {
    t.category = DimmCategory::faulty;
    double u = rng_.uniform();
    auto mode = InjectedMode::bank;
    for (auto m : kInjectedModes) {
      const double w = p_.fault_mode_mix[static_cast<std::size_t>(m)];
      if (u < w) {
        mode = m;
        break;
      }
      u -= w;
    }
    t.mode = mode;
    const bool single = rng_.bernoulli(p_.single_device_share);
    t.scope = single ? DeviceScope::single_device : DeviceScope::multi_device;
    const double hazard = p_.ue_hazard[static_cast<std::size_t>(mode)] *
                          (single ? p_.single_device_factor : p_.multi_device_factor);
    t.degrading = rng_.bernoulli(std::min(1.0, hazard));
    t.decoy = !t.degrading && mode == InjectedMode::cell && rng_.bernoulli(p_.decoy_fraction);
    t.risky_signature = t.degrading || t.decoy;
    const auto& spec = pick_pattern(t.risky_signature ? p_.risky_patterns : p_.benign_patterns, rng_);
    const ErrorBitmap sig = build_signature(spec, width_, rng_);
    t.signature = sig;

    const CellAddress base = random_cell(rng_, devices_);
    t.devices.push_back(base.device);
    if (!single) t.devices.push_back(static_cast<int>(other_than(base.device, devices_, rng_)));

    std::int64_t onset = 0;
    std::int64_t end = dur_;  // CEs strictly before this minute
    if (t.degrading) {
      onset = static_cast<std::int64_t>(rng_.index(std::max<std::int64_t>(1, dur_ / 2)));
      const std::int64_t lo = std::min<std::int64_t>(2 * 1440, dur_ / 4);
      const std::int64_t hi = std::max(lo, std::min<std::int64_t>(25 * 1440, dur_ - onset - 1));
      const std::int64_t ue = std::min(dur_ - 1, onset + std::max<std::int64_t>(1, rng_.range(lo, hi)));
      end = ue;
      t.ue_time = at(ue);
    } else {
      onset = static_cast<std::int64_t>(rng_.index(dur_));
    }
    t.onset = at(onset);

    auto on_device = [&](int device) {
      CellAddress c = base;
      c.device = device;
      return c;
    };
    // Onset burst: enough CEs on each faulty device to exhibit the mode.
    for (int device : t.devices) {
      const CellAddress c = on_device(device);
      const bool along_row = mode == InjectedMode::row || mode == InjectedMode::bank;
      const bool along_column = mode == InjectedMode::column || mode == InjectedMode::bank;
      if (mode == InjectedMode::cell) {
        for (int k = 0; k < kOnsetBurst; ++k) emit(onset, c, sig);
      }
      if (along_row) {
        std::int64_t col = c.column;
        for (int k = 0; k < kOnsetBurst; ++k) {
          CellAddress x = c;
          x.column = col;
          emit(onset, x, sig);
          col = (col + 1 + static_cast<std::int64_t>(rng_.index(7))) % kColumns;
        }
      }
      if (along_column) {
        std::int64_t row = c.row;
        for (int k = 0; k < kOnsetBurst; ++k) {
          CellAddress x = c;
          x.row = row;
          emit(onset, x, sig);
          row = (row + 1 + static_cast<std::int64_t>(rng_.index(7))) % kRows;
        }
      }
    }

    const double rate = t.degrading ? p_.degrading_ce_rate : p_.ce_rate;
    double minute = static_cast<double>(onset) + rng_.exponential(rate) * 1440.0;
    while (minute < static_cast<double>(end)) {
      CellAddress c = on_device(t.devices[rng_.index(t.devices.size())]);
      switch (mode) {
        case InjectedMode::cell: break;
        case InjectedMode::row: c.column = static_cast<std::int64_t>(rng_.index(kColumns)); break;
        case InjectedMode::column: c.row = static_cast<std::int64_t>(rng_.index(kRows)); break;
        case InjectedMode::bank:
          if (rng_.bernoulli(0.5)) {
            c.column = static_cast<std::int64_t>(rng_.index(kColumns));
          } else {
            c.row = static_cast<std::int64_t>(rng_.index(kRows));
          }
          break;
      }
      const ErrorBitmap bm = rng_.bernoulli(p_.full_signature_share) ? sig : one_bit_of(sig, rng_);
      const int count = rng_.bernoulli(0.1) ? static_cast<int>(rng_.range(2, 4)) : 1;
      emit(static_cast<std::int64_t>(minute), c, bm, count);
      minute += rng_.exponential(rate) * 1440.0;
    }

    if (t.ue_time) out_.ues.push_back({*t.ue_time, dimm_, base, false});
  }

  const PlatformProfile& p_;
  std::int64_t dur_;
  Rng& rng_;
  EventLog& out_;
  int width_;
  int devices_;
  DimmId dimm_;
};

DimmMeta random_meta(const DimmId& dimm, const PlatformProfile& profile, Rng& rng) {
  static const char* kVendors[] = {"vendor_a", "vendor_b", "vendor_c", "vendor_d"};
  static const char* kProcesses[] = {"1x", "1y", "1z"};
  static const int kFrequencies[] = {2400, 2666, 2933, 3200};
  DimmMeta m;
  m.dimm = dimm;
  m.manufacturer = kVendors[rng.index(4)];
  m.data_width = profile.data_width;
  m.frequency = kFrequencies[rng.index(4)];
  m.chip_process = kProcesses[rng.index(3)];
  m.platform = profile.platform;
  return m;
}

}  // namespace

SimulationResult generate_trace(const PlatformProfile& profile, std::size_t n_dimms, double duration_days,
                                std::uint64_t seed) {
  profile.validate();
  if (n_dimms < 1) throw Error(ErrorCode::config, "n_dimms must be >= 1");
  if (!(duration_days >= 0.0) || !std::isfinite(duration_days)) {
    throw Error(ErrorCode::config, "duration must be a non-negative number of days");
  }
  SimulationResult result;
  result.truth.profile = profile.name;
  result.truth.seed = seed;
  const auto duration_min = static_cast<std::int64_t>(std::floor(duration_days * 1440.0));
  for (std::size_t i = 0; i < n_dimms; ++i) {
    const DimmId dimm = simulated_dimm_id(i);
    Rng rng(mix64(seed ^ fnv1a64(dimm.to_string())));
    result.meta.push_back(random_meta(dimm, profile, rng));
    if (duration_min <= 0) {
      DimmTruth idle;
      idle.dimm = dimm;
      result.truth.dimms.push_back(std::move(idle));
      continue;
    }
    DimmGenerator gen(profile, duration_min, rng, result.events);
    result.truth.dimms.push_back(gen.run(dimm));
  }
  return result;
}

json GroundTruthReport::to_json() const {
  json list = json::array();
  for (const auto& m : mismatches) {
    list.push_back({{"dimm", m.dimm.to_string()},
                    {"expected_mode", std::string(memfail::to_string(m.expected_mode))},
                    {"expected_scope", std::string(memfail::to_string(m.expected_scope))},
                    {"diagnosis", memfail::to_json(m.diagnosis)}});
  }
  return {{"faulty_dimms", faulty_dimms},
          {"recovered", recovered},
          {"recovery", recovery ? json(*recovery) : json(nullptr)},
          {"passed", passed},
          {"threshold_mismatch", threshold_mismatch},
          {"mismatches", list}};
}

GroundTruthReport verify_ground_truth(const ValidatedTrace& trace, const GroundTruth& truth,
                                      const FaultThresholds& thresholds) {
  thresholds.validate();
  GroundTruthReport r;
  r.threshold_mismatch = thresholds.cell_min_ces > kOnsetBurst || thresholds.row_min_distinct_columns > kOnsetBurst ||
                         thresholds.column_min_distinct_rows > kOnsetBurst;
  for (const auto& d : truth.dimms) {
    if (d.category != DimmCategory::faulty || !d.mode) continue;
    ++r.faulty_dimms;
    auto diag = classify_faults(trace.ces_of(d.dimm), thresholds);
    diag.dimm = d.dimm;
    if (has_mode(diag, as_fault_mode(*d.mode)) && diag.device_scope == d.scope) {
      ++r.recovered;
    } else {
      r.mismatches.push_back({d.dimm, *d.mode, d.scope, diag});
    }
  }
  if (r.faulty_dimms > 0) {
    r.recovery = static_cast<double>(r.recovered) / static_cast<double>(r.faulty_dimms);
    r.passed = *r.recovery >= 0.95;
  }
  return r;
}

}  // namespace memfail
