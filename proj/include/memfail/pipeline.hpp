#pragma once

// Stage orchestration for the command-line tool. Every stage reads and
// writes files under the configured work directory and emits
// <reports>/<stage>.json recording the tool version, config hash, schema
// hash and seed. The analyze report doubles as the fault-analysis artifact
// and the evaluate report carries the full evaluation.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "memfail/features.hpp"
#include "memfail/ingest.hpp"
#include "memfail/predictors.hpp"
#include "memfail/simulator.hpp"

namespace memfail {

inline constexpr const char* kToolVersion = "0.1.0";

enum class Stage { simulate, ingest, analyze, featurize, train, predict, evaluate, report };

std::string_view to_string(Stage s);
std::optional<Stage> parse_stage(std::string_view s);

FeatureConfig daily_features();

struct PipelineConfig {
  std::filesystem::path work_dir = "memfail-out";

  // Artifact file names, relative to work_dir unless absolute.
  std::string trace = "trace.jsonl";
  std::string meta = "meta.json";
  std::string truth = "truth.json";
  std::string features = "features.csv";
  std::string schema = "schema.json";
  std::string model = "model.json";
  std::string predictions = "predictions.csv";
  std::string outcomes = "outcomes.csv";
  std::string reports = "reports";

  // simulate
  std::string profile = "purley";
  nlohmann::json profile_overrides = nlohmann::json::object();
  std::size_t n_dimms = 1000;
  double duration_days = 60.0;

  // ingest
  std::optional<std::filesystem::path> ingest_input;
  std::string ingest_format = "jsonl";  // jsonl | csv
  ColumnMap column_map;
  double max_reject_rate = 1.0;

  // Scores once per day per DIMM; a "features" section in the config file
  // replaces this whole block.
  FeatureConfig features_config = daily_features();
  SampleMode sample_mode = SampleMode::batch;
  TrainOptions train;
  double holdout_fraction = 0.3;  // share of DIMMs held out of training, chosen by hash
  double threshold = 0.5;
  double y_c = 0.1;
  double v_a = 10.0;
  bool tick_level = false;
  std::uint64_t seed = 42;
  int threads = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& j);

  std::filesystem::path path(const std::string& name) const;
  // FNV-1a of the canonical JSON form, excluding the thread count.
  std::string hash() const;
};

PipelineConfig load_config(const std::filesystem::path& file);

// True when the DIMM belongs to the evaluation holdout for this seed.
bool in_holdout(const DimmId& dimm, double fraction, std::uint64_t seed);

struct StageResult {
  int exit_code = 0;
  std::filesystem::path report;
  std::string error;
};

// Runs one stage. Failures are reported through exit_code (2 for config
// problems, 3 for data problems) and `error`; nothing is thrown.
StageResult run_stage(Stage stage, const PipelineConfig& config);

// simulate (or ingest when an input is configured), analyze, featurize,
// train, predict, evaluate and report. Stops at the first failing stage.
StageResult run_pipeline(const PipelineConfig& config);

struct FigTables {
  nlohmann::json json;
  std::string mode_csv;     // fault mode -> relative UE rate
  std::string pattern_csv;  // DQ/beat count and interval -> relative UE rate
};

// Tables behind the relative-UE-rate figures, from an analysis report.
FigTables emit_fig_tables(const nlohmann::json& analysis);

}  // namespace memfail
