#pragma once

// DIMM-level outcome matching against the prediction window, standard
// classification metrics and the VM-interruption-reduction rate (VIRR).

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "memfail/trace_model.hpp"

namespace memfail {

struct PredictionRecord {
  DimmId dimm;
  Timestamp t;
  double score = 0.0;
  bool positive = false;

  bool operator==(const PredictionRecord&) const = default;
};

struct Confusion {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;

  std::int64_t total() const { return tp + fp + fn + tn; }
  bool operator==(const Confusion&) const = default;
};

enum class Outcome { tp, fp, fn, tn };

std::string_view to_string(Outcome o);

struct DimmOutcome {
  DimmId dimm;
  Outcome outcome = Outcome::tn;
  std::optional<Timestamp> first_ue;
  std::optional<Timestamp> first_positive;
  std::optional<Timestamp> first_hit;  // earliest positive whose window holds a UE
};

struct MatchResult {
  Confusion confusion;
  std::vector<DimmOutcome> per_dimm;  // in population order
};

// Per DIMM of `population`:
//   TP  the DIMM has a UE and a positive prediction at some t with a UE in
//       [t + lead, t + lead + prediction]
//   FN  the DIMM has a UE but no such prediction
//   FP  the DIMM has no UE and at least one positive prediction
//   TN  otherwise
// Throws Error(unknown_dimm) for a prediction outside the population.
MatchResult match_outcomes(std::span<const PredictionRecord> predictions, std::span<const UeEvent> ues,
                           std::span<const DimmId> population, const WindowConfig& cfg);

// Diagnostic per-tick accounting: each prediction record is scored against
// the label of its own tick.
Confusion match_ticks(std::span<const PredictionRecord> predictions, std::span<const UeEvent> ues,
                      const WindowConfig& cfg);

struct Metrics {
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
};

// A ratio with a zero denominator is absent.
Metrics metrics(std::int64_t tp, std::int64_t fp, std::int64_t fn);
std::optional<double> f1_score(double precision, double recall);

// (1 - y_c / precision) * recall; absent when precision is 0.
std::optional<double> virr(double precision, double recall, double y_c = 0.1);

struct VirrBreakdown {
  double v = 0.0;        // interruptions without prediction: v_a (TP + FN)
  double v1 = 0.0;       // cold migrations of predicted DIMMs: v_a y_c (TP + FP)
  double v2 = 0.0;       // missed failures: v_a FN
  double v_prime = 0.0;  // v1 + v2
  std::optional<double> virr;  // (v - v') / v, absent when v = 0
};

VirrBreakdown virr_from_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn, double v_a = 10.0,
                               double y_c = 0.1);

struct EvalOptions {
  double y_c = 0.1;
  double v_a = 10.0;
  bool tick_level = false;
};

struct EvalReport {
  Confusion confusion;
  Metrics metrics;
  std::optional<double> virr;
  VirrBreakdown breakdown;
  EvalOptions options;
  WindowConfig window;
  std::optional<Confusion> tick_confusion;
  std::map<std::string, Confusion> per_platform;
  std::vector<DimmOutcome> outcomes;

  nlohmann::json to_json() const;
};

// Scores `predictions` against `population`, taking UEs and platform
// metadata from `trace`.
EvalReport evaluate(std::span<const PredictionRecord> predictions, const ValidatedTrace& trace,
                    std::span<const DimmId> population, const WindowConfig& window,
                    const EvalOptions& options = {});

void write_outcomes_csv(std::ostream& os, std::span<const DimmOutcome> outcomes);

// Prediction files: CSV with header server,socket,channel,slot,t,score,positive.
void write_predictions_csv(std::ostream& os, std::span<const PredictionRecord> predictions);
std::vector<PredictionRecord> read_predictions_csv(std::istream& is);

nlohmann::json to_json(const Confusion& c);

}  // namespace memfail
