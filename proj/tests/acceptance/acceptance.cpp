// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Each criterion also fails when it exceeds its runtime budget.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "memfail/evaluation.hpp"
#include "memfail/fault_analysis.hpp"
#include "memfail/features.hpp"
#include "memfail/pipeline.hpp"
#include "memfail/random.hpp"
#include "memfail/simulator.hpp"
#include "oracles.hpp"

using namespace memfail;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

// Reference (precision, recall, VIRR, F1) scores per method and platform.
struct TableRow {
  const char* name;
  double precision;
  double recall;
  double virr;
  double f1;
};

constexpr TableRow kTable[] = {
    {"Risky CE pattern", 0.53, 0.46, 0.37, 0.49}, {"RF Purley", 0.61, 0.62, 0.52, 0.61},
    {"LightGBM Purley", 0.54, 0.80, 0.65, 0.64},  {"FT-Transformer Purley", 0.49, 0.74, 0.58, 0.59},
    {"RF Whitley", 0.34, 0.46, 0.32, 0.39},       {"LightGBM Whitley", 0.46, 0.54, 0.45, 0.49},
    {"FT-Transformer Whitley", 0.53, 0.49, 0.40, 0.50}, {"RF K920", 0.44, 0.51, 0.39, 0.47},
    {"LightGBM K920", 0.51, 0.57, 0.46, 0.54},    {"FT-Transformer K920", 0.40, 0.54, 0.41, 0.46},
};

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("memfail-acceptance-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void require_ok(const StageResult& r, std::string_view what) {
  if (r.exit_code != 0) throw std::runtime_error(fmt::format("{} failed: {}", what, r.error));
}

Verdict ac1_virr_table() {
  Verdict o;
  int close = 0;
  double worst = 0.0;
  std::string worst_row;
  for (const auto& row : kTable) {
    const double v = *virr(row.precision, row.recall, 0.1);
    const double err = std::abs(v - row.virr);
    if (err <= 0.01 + 1e-12) ++close;
    if (err > worst) {
      worst = err;
      worst_row = row.name;
    }
    if (err > 0.03 + 1e-12) o.pass = false;
  }
  const double lgbm = *virr(0.54, 0.80, 0.1);
  const bool anchor = std::round(lgbm * 100.0) == 65.0;
  o.pass = o.pass && close >= 8 && anchor;
  o.detail = fmt::format("{}/10 within 0.01, max error {:.4f} ({}), LightGBM Purley {:.4f}", close, worst, worst_row,
                         lgbm);
  return o;
}

Verdict ac2_f1_table() {
  Verdict o;
  double worst = 0.0;
  for (const auto& row : kTable) {
    const double f = *f1_score(row.precision, row.recall);
    worst = std::max(worst, std::abs(f - row.f1));
  }
  o.pass = worst <= 0.01 + 1e-12;
  o.detail = fmt::format("max F1 error {:.4f}", worst);
  return o;
}

Verdict ac3_virr_identity() {
  Verdict o;
  Rng rng(3);
  double worst = 0.0;
  int checked = 0;
  for (int i = 0; i < 10'000; ++i) {
    const auto tp = rng.range(0, 10'000);
    const auto fp = rng.range(0, 10'000);
    auto fn = rng.range(0, 10'000);
    if (tp + fn == 0) fn = 1;
    const double y_c = rng.uniform();
    const double v_a = 0.5 + 50.0 * rng.uniform();
    const auto b = virr_from_counts(tp, fp, fn, v_a, y_c);
    const double closed =
        (static_cast<double>(tp) - y_c * static_cast<double>(tp + fp)) / static_cast<double>(tp + fn);
    if (!b.virr) {
      o.pass = false;
      continue;
    }
    worst = std::max(worst, std::abs(*b.virr - closed));
    ++checked;
  }
  int negative = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto tp = rng.range(1, 50);
    const auto fp = tp * rng.range(10, 100);
    const auto fn = rng.range(0, 100);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    const bool below = precision < 0.1;
    const auto b = virr_from_counts(tp, fp, fn);
    if (below && *b.virr < 0.0 && *virr(precision, recall) < 0.0) ++negative;
    if (!below) ++negative;
  }
  o.pass = o.pass && worst < 1e-12 && checked == 10'000 && negative == 1000;
  o.detail = fmt::format("max deviation {:.3e} over {} triples, negative regime {}/1000", worst, checked, negative);
  return o;
}

Verdict ac4_fault_classifier() {
  Verdict o;
  Rng rng(4);
  int agree = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = static_cast<std::size_t>(rng.range(0, 1000));
    auto ev = oracle::random_ces(rng, DimmId{"acc", 0, 0, 0}, n, 1'700'000'000'000, 30LL * 86'400'000);
    std::sort(ev.begin(), ev.end(), ce_less);
    FaultThresholds th;
    th.cell_min_ces = static_cast<int>(rng.range(1, 6));
    th.row_min_distinct_columns = static_cast<int>(rng.range(1, 5));
    th.column_min_distinct_rows = static_cast<int>(rng.range(1, 5));
    TimeRange w = TimeRange::all();
    if (rng.bernoulli(0.5)) {
      const auto a = 1'700'000'000'000 + rng.range(0, 15LL * 86'400'000);
      w = TimeRange{from_epoch_ms(a), from_epoch_ms(a + rng.range(1, 15LL * 86'400'000))};
    }
    if (classify_faults(ev, th, w) == oracle::classify(ev, th, w)) ++agree;
  }
  std::string recoveries;
  bool recovered = true;
  for (const auto& p : builtin_profiles()) {
    const auto sim = generate_trace(p, 2000, 60.0, 42);
    const auto r = verify_ground_truth(validate_trace(sim.events, sim.meta), sim.truth, FaultThresholds{});
    recovered = recovered && r.recovery && *r.recovery >= 0.95;
    recoveries += fmt::format(" {} {:.4f}", p.name, r.recovery.value_or(-1.0));
  }
  o.pass = agree == 500 && recovered;
  o.detail = fmt::format("oracle agreement {}/500, recovery{}", agree, recoveries);
  return o;
}

Verdict ac5_bit_patterns() {
  Verdict o;
  Rng rng(5);
  int agree = 0;
  for (int i = 0; i < 100'000; ++i) {
    const auto b = oracle::random_x4_bitmap(rng);
    if (bit_pattern_stats(b) == oracle::bit_scan(b)) ++agree;
  }
  ErrorBitmap anchor;
  anchor.set(0, 1);
  anchor.set(4, 3);
  const auto s = bit_pattern_stats(anchor);
  const bool anchor_ok = s.dq_count == 2 && s.beat_count == 2 && s.beat_interval == 4;
  o.pass = agree == 100'000 && anchor_ok;
  o.detail = fmt::format("naive-scan agreement {}/100000, anchor dq={} beats={} interval={}", agree, s.dq_count,
                         s.beat_count, s.beat_interval);
  return o;
}

Verdict ac6_labeling() {
  Verdict o;
  FeatureConfig cfg;
  cfg.window.prediction_interval = hours(1);
  const FeatureSchema schema{cfg};
  const auto profiles = builtin_profiles();
  int identical = 0;
  std::size_t samples = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto& p = profiles[seed % profiles.size()];
    const auto sim = generate_trace(p, 80, 20.0, seed);
    const auto trace = filter_predictable_population(validate_trace(sim.events, sim.meta));
    const auto batch = build_samples(trace, schema, SampleMode::batch);
    const auto stream = build_samples(trace, schema, SampleMode::stream);
    samples += batch.samples.size();
    if (batch.samples == stream.samples && batch.unknown_category_dimms == stream.unknown_category_dimms) ++identical;
  }

  Rng rng(6);
  int label_agree = 0;
  constexpr int kLabelCases = 20'000;
  const WindowConfig w;
  const auto t0 = from_epoch_ms(1'700'000'000'000);
  for (int i = 0; i < kLabelCases; ++i) {
    const auto t = t0 + Millis(rng.range(0, 10LL * 86'400'000));
    std::vector<Timestamp> ues;
    const auto n = rng.range(0, 4);
    for (std::int64_t k = 0; k < n; ++k) {
      switch (rng.range(0, 4)) {
        case 0: ues.push_back(t + w.lead); break;
        case 1: ues.push_back(t + w.lead + w.prediction); break;
        case 2: ues.push_back(t + w.lead - Millis(1)); break;
        case 3: ues.push_back(t + w.lead + w.prediction + Millis(1)); break;
        default: ues.push_back(t0 + Millis(rng.range(0, 60LL * 86'400'000))); break;
      }
    }
    std::sort(ues.begin(), ues.end());
    if ((label(t, ues, w) == Label::positive) == oracle::interval_label(t, ues, w)) ++label_agree;
  }
  o.pass = identical == 20 && label_agree == kLabelCases;
  o.detail = fmt::format("batch==stream on {}/20 seeds ({} samples), label agreement {}/{}", identical, samples,
                         label_agree, kLabelCases);
  return o;
}

Verdict ac7_simulator_fidelity() {
  Verdict o;
  for (const auto& p : builtin_profiles()) {
    const auto sim = generate_trace(p, 5000, 60.0, 42);
    const auto trace = validate_trace(sim.events, sim.meta);
    std::size_t ue_dimms = 0;
    std::size_t predictable = 0;
    for (const auto& d : trace.dimms()) {
      const auto ues = trace.ues_of(d);
      if (ues.empty()) continue;
      ++ue_dimms;
      if (!ues.front().sudden) ++predictable;
    }
    const double fraction = ue_dimms ? static_cast<double>(predictable) / static_cast<double>(ue_dimms) : 0.0;
    const bool fraction_ok = std::abs(fraction - p.predictable_ue_fraction) <= 0.05;

    const auto population = filter_predictable_population(trace);
    std::vector<FaultDiagnosis> diags;
    std::set<DimmId> failed;
    for (const auto& d : population.dimms()) {
      auto ces = population.ces_of(d);
      const auto ues = population.ues_of(d);
      std::size_t cut = ces.size();
      if (!ues.empty()) {
        failed.insert(d);
        cut = static_cast<std::size_t>(
            std::lower_bound(ces.begin(), ces.end(), ues.front().timestamp,
                             [](const CeEvent& e, Timestamp t) { return e.timestamp < t; }) -
            ces.begin());
      }
      auto diag = classify_faults(ces.subspan(0, cut), FaultThresholds{});
      diag.dimm = d;
      diags.push_back(diag);
    }
    const auto rates = relative_ue_rate(diags, failed);
    auto rate = [&](FaultMode m) { return rates.count(m) ? rates.at(m).rate : 0.0; };
    const double cell = rate(FaultMode::cell);
    const double row = rate(FaultMode::row);
    const double bank = rate(FaultMode::bank);
    const double single = rate(FaultMode::single_device);
    const double multi = rate(FaultMode::multi_device);
    bool ordering = row > cell && bank > cell;
    if (p.name == "purley") ordering = ordering && single > multi;
    if (p.name == "k920") ordering = ordering && multi > single;
    o.pass = o.pass && fraction_ok && ordering;
    o.detail += fmt::format("{}{} predictable {:.4f} (target {:.2f}) cell {:.3f} row {:.3f} bank {:.3f} single {:.3f} "
                            "multi {:.3f}",
                            o.detail.empty() ? "" : "; ", p.name, fraction, p.predictable_ue_fraction, cell, row, bank,
                            single, multi);
  }
  return o;
}

double holdout_f1(PipelineConfig cfg, ModelKind kind, std::optional<double> positive_weight, std::string* model) {
  cfg.train.kind = kind;
  cfg.train.forest.positive_weight = positive_weight;
  cfg.train.gbdt.positive_weight = positive_weight;
  cfg.train.negative_ratio.reset();
  require_ok(run_stage(Stage::train, cfg), "train");
  if (model) *model = slurp(cfg.path(cfg.model));
  require_ok(run_stage(Stage::predict, cfg), "predict");
  require_ok(run_stage(Stage::evaluate, cfg), "evaluate");
  const auto eval = json::parse(slurp(cfg.path(cfg.reports) / "evaluate.json")).at("evaluation");
  return eval.at("f1").is_null() ? 0.0 : eval.at("f1").get<double>();
}

Verdict ac8_predictors() {
  Verdict o;
  PipelineConfig cfg;
  cfg.work_dir = fresh_dir("predictors");
  cfg.profile = "purley";
  cfg.n_dimms = 5000;
  cfg.duration_days = 60.0;
  cfg.seed = 42;
  cfg.features_config.window.prediction_interval = days(1);
  for (auto stage : {Stage::simulate, Stage::featurize}) require_ok(run_stage(stage, cfg), to_string(stage));

  std::string gbdt_model;
  std::string gbdt_again;
  std::string forest_model;
  std::string forest_again;
  const double gbdt = holdout_f1(cfg, ModelKind::gbdt, 1.0, &gbdt_model);
  holdout_f1(cfg, ModelKind::gbdt, 1.0, &gbdt_again);
  const double forest = holdout_f1(cfg, ModelKind::forest, 1.0, &forest_model);
  holdout_f1(cfg, ModelKind::forest, 1.0, &forest_again);
  const double rules = holdout_f1(cfg, ModelKind::rules, std::nullopt, nullptr);
  const bool deterministic = gbdt_model == gbdt_again && forest_model == forest_again;

  const double gbdt_default = holdout_f1(cfg, ModelKind::gbdt, std::nullopt, nullptr);
  const double forest_default = holdout_f1(cfg, ModelKind::forest, std::nullopt, nullptr);
  std::printf("INFO AC8 default class weighting (negatives/positives): holdout F1 gbdt %.4f forest %.4f\n",
              gbdt_default, forest_default);

  o.pass = gbdt >= 0.9 && forest >= 0.9 && gbdt >= forest - 0.02 && rules < gbdt && deterministic;
  o.detail = fmt::format("holdout F1 gbdt {:.4f} forest {:.4f} rules {:.4f}, deterministic {}", gbdt, forest, rules,
                         deterministic);
  return o;
}

Verdict ac9_determinism() {
  Verdict o;
  std::string reports[2];
  for (int i = 0; i < 2; ++i) {
    PipelineConfig cfg;
    cfg.work_dir = fresh_dir(fmt::format("e2e-{}", i));
    cfg.seed = 42;
    require_ok(run_pipeline(cfg), "pipeline");
    reports[i] = slurp(cfg.path(cfg.reports) / "evaluate.json");
  }
  o.pass = !reports[0].empty() && reports[0] == reports[1];
  o.detail = fmt::format("EvalReport {} bytes, identical {}", reports[0].size(), reports[0] == reports[1]);
  return o;
}

struct Criterion {
  const char* id;
  const char* name;
  double budget_s;
  std::function<Verdict()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"AC1", "VIRR arithmetic against the reference scores", 1.0, ac1_virr_table},
      {"AC2", "F1 arithmetic against the reference scores", 1.0, ac2_f1_table},
      {"AC3", "VIRR count identity and negative regime", 5.0, ac3_virr_identity},
      {"AC4", "fault classifier oracle and injected-fault recovery", 60.0, ac4_fault_classifier},
      {"AC5", "bit-pattern statistics against a naive scan", 10.0, ac5_bit_patterns},
      {"AC6", "batch/stream equivalence and label boundaries", 60.0, ac6_labeling},
      {"AC7", "simulator predictable fractions and hazard ordering", 120.0, ac7_simulator_fidelity},
      {"AC8", "predictor holdout quality and determinism", 300.0, ac8_predictors},
      {"AC9", "end-to-end report determinism", 300.0, ac9_determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    failures += pass ? 0 : 1;
    std::printf("%s %s: %s [%s] %.2f s, budget %.0f s%s\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                secs, c.budget_s, in_time ? "" : " (over budget)");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
