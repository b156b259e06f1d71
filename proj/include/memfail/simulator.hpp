#pragma once

// Seeded fault-injection trace generator with per-platform profiles, and a
// checker that the fault classifier recovers what was injected.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "memfail/fault_analysis.hpp"
#include "memfail/trace_model.hpp"

namespace memfail {

// Shape of a CE bitmap signature: distinct DQs, distinct beats and the span
// between the first and last erroneous beat.
struct PatternSpec {
  int dq_count = 1;
  int beat_count = 1;
  int beat_interval = 0;
  double weight = 1.0;
};

enum class InjectedMode { cell = 0, row = 1, column = 2, bank = 3 };
inline constexpr std::array<InjectedMode, 4> kInjectedModes = {InjectedMode::cell, InjectedMode::row,
                                                              InjectedMode::column, InjectedMode::bank};
std::string_view to_string(InjectedMode m);
FaultMode as_fault_mode(InjectedMode m);

struct PlatformProfile {
  std::string name;
  Platform platform = Platform::custom;
  DataWidth data_width = DataWidth::x4;
  double predictable_ue_fraction = 0.73;  // share of UE DIMMs with prior CEs
  double faulty_fraction = 0.5;           // share of non-sudden DIMMs carrying a fault
  std::array<double, 4> fault_mode_mix{};  // indexed by InjectedMode
  double single_device_share = 0.5;        // P(single device | fault); multi = 1 - this
  std::array<double, 4> ue_hazard{};       // P(degrades to a UE | mode) before the scope factor
  double single_device_factor = 1.0;       // hazard multiplier for single-device faults
  double multi_device_factor = 1.0;        // hazard multiplier for multi-device faults
  std::vector<PatternSpec> risky_patterns;
  std::vector<PatternSpec> benign_patterns;
  double decoy_fraction = 0.3;        // non-degrading cell faults that still carry a risky signature
  double ce_rate = 2.0;               // CEs/day of a stable faulty DIMM
  double degrading_ce_rate = 6.0;     // CEs/day of a DIMM heading for a UE
  double background_ce_rate = 0.01;   // CEs/day of a healthy DIMM after its first CE
  double full_signature_share = 0.6;  // CEs carrying the whole signature rather than one bit of it

  // Throws Error(invalid_profile).
  void validate() const;
  // Probability that a non-sudden DIMM carries a fault that degrades to a UE.
  double degrading_probability() const;
  // Per-DIMM sudden-UE probability that makes the expected predictable share
  // of UE DIMMs equal predictable_ue_fraction.
  double sudden_probability() const;

  nlohmann::json to_json() const;
  // Starts from `base` and applies any fields present in `j`.
  static PlatformProfile from_json(const nlohmann::json& j, const PlatformProfile& base);
};

std::vector<PlatformProfile> builtin_profiles();
// Throws Error(invalid_profile) for an unknown name.
PlatformProfile builtin_profile(std::string_view name);

enum class DimmCategory { healthy, faulty, sudden };
std::string_view to_string(DimmCategory c);

struct DimmTruth {
  DimmId dimm;
  DimmCategory category = DimmCategory::healthy;
  std::optional<InjectedMode> mode;
  DeviceScope scope = DeviceScope::none;
  std::vector<int> devices;
  bool degrading = false;
  bool decoy = false;
  bool risky_signature = false;  // the planted risk marker
  std::optional<ErrorBitmap> signature;
  std::optional<Timestamp> onset;
  std::optional<Timestamp> ue_time;
  bool sudden_ue = false;
};

struct GroundTruth {
  std::string profile;
  std::uint64_t seed = 0;
  std::vector<DimmTruth> dimms;

  nlohmann::json to_json() const;
};

struct SimulationResult {
  EventLog events;
  std::vector<DimmMeta> meta;
  GroundTruth truth;
};

// Base of every generated timestamp: 2023-01-01T00:00:00Z.
inline constexpr std::int64_t kSimulationEpochMs = 1'672'531'200'000;
// CEs per device in the burst that marks a fault's onset.
inline constexpr int kOnsetBurst = 3;

DimmId simulated_dimm_id(std::size_t index);

SimulationResult generate_trace(const PlatformProfile& profile, std::size_t n_dimms, double duration_days,
                                std::uint64_t seed);

struct TruthMismatch {
  DimmId dimm;
  InjectedMode expected_mode;
  DeviceScope expected_scope;
  FaultDiagnosis diagnosis;
};

struct GroundTruthReport {
  std::size_t faulty_dimms = 0;
  std::size_t recovered = 0;
  std::optional<double> recovery;  // absent for an empty population
  bool passed = true;              // recovery >= 0.95 (or vacuous)
  bool threshold_mismatch = false; // some threshold exceeds the injected burst size
  std::vector<TruthMismatch> mismatches;

  nlohmann::json to_json() const;
};

// Diagnoses every injected faulty DIMM from its full CE history; a DIMM is
// recovered when its injected mode is present and its device scope matches.
GroundTruthReport verify_ground_truth(const ValidatedTrace& trace, const GroundTruth& truth,
                                      const FaultThresholds& thresholds);

}  // namespace memfail
