#include "memfail/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "memfail/evaluation.hpp"
#include "memfail/hash.hpp"
#include "memfail/trace_io.hpp"

namespace memfail {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::simulate: return "simulate";
    case Stage::ingest: return "ingest";
    case Stage::analyze: return "analyze";
    case Stage::featurize: return "featurize";
    case Stage::train: return "train";
    case Stage::predict: return "predict";
    case Stage::evaluate: return "evaluate";
    case Stage::report: return "report";
  }
  return "report";
}

std::optional<Stage> parse_stage(std::string_view s) {
  for (auto st : {Stage::simulate, Stage::ingest, Stage::analyze, Stage::featurize, Stage::train, Stage::predict,
                  Stage::evaluate, Stage::report}) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

FeatureConfig daily_features() {
  FeatureConfig f;
  f.window.prediction_interval = days(1);
  return f;
}

void PipelineConfig::validate() const {
  features_config.validate();
  if (n_dimms < 1) throw Error(ErrorCode::config, "simulate.n_dimms must be >= 1");
  if (!(duration_days >= 0.0)) throw Error(ErrorCode::config, "simulate.duration_days must be >= 0");
  if (ingest_format != "jsonl" && ingest_format != "csv") throw Error(ErrorCode::config, "ingest.format must be jsonl or csv");
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) throw Error(ErrorCode::config, "holdout_fraction must lie in [0, 1)");
  if (!(y_c >= 0.0 && y_c <= 1.0)) throw Error(ErrorCode::config, "y_c must lie in [0, 1]");
  if (!(v_a > 0.0)) throw Error(ErrorCode::config, "v_a must be positive");
  if (!(max_reject_rate >= 0.0 && max_reject_rate <= 1.0)) throw Error(ErrorCode::config, "max_reject_rate must lie in [0, 1]");
  if (threads < 1) throw Error(ErrorCode::config, "threads must be >= 1");
}

json PipelineConfig::to_json() const {
  json ingest = {{"format", ingest_format}, {"column_map", column_map.to_json()}, {"max_reject_rate", max_reject_rate}};
  ingest["input"] = ingest_input ? json(ingest_input->generic_string()) : json(nullptr);
  return {{"work_dir", work_dir.generic_string()},
          {"paths",
           {{"trace", trace},
            {"meta", meta},
            {"truth", truth},
            {"features", features},
            {"schema", schema},
            {"model", model},
            {"predictions", predictions},
            {"outcomes", outcomes},
            {"reports", reports}}},
          {"simulate",
           {{"profile", profile},
            {"profile_overrides", profile_overrides},
            {"n_dimms", n_dimms},
            {"duration_days", duration_days}}},
          {"ingest", ingest},
          {"features", features_config.to_json()},
          {"sample_mode", sample_mode == SampleMode::batch ? "batch" : "stream"},
          {"train", train.to_json()},
          {"holdout_fraction", holdout_fraction},
          {"threshold", threshold},
          {"y_c", y_c},
          {"v_a", v_a},
          {"tick_level", tick_level},
          {"seed", seed},
          {"threads", threads}};
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* where) {
  if (!j.is_object()) throw Error(ErrorCode::config, fmt::format("{} must be an object", where));
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw Error(ErrorCode::config, fmt::format("unknown key '{}' in {}", key, where));
    }
  }
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j) {
  PipelineConfig c;
  try {
    reject_unknown(j,
                   {"work_dir", "paths", "simulate", "ingest", "features", "sample_mode", "train", "holdout_fraction",
                    "threshold", "y_c", "v_a", "tick_level", "seed", "threads"},
                   "config");
    if (j.contains("work_dir")) c.work_dir = j.at("work_dir").get<std::string>();
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      reject_unknown(p, {"trace", "meta", "truth", "features", "schema", "model", "predictions", "outcomes", "reports"},
                     "paths");
      c.trace = p.value("trace", c.trace);
      c.meta = p.value("meta", c.meta);
      c.truth = p.value("truth", c.truth);
      c.features = p.value("features", c.features);
      c.schema = p.value("schema", c.schema);
      c.model = p.value("model", c.model);
      c.predictions = p.value("predictions", c.predictions);
      c.outcomes = p.value("outcomes", c.outcomes);
      c.reports = p.value("reports", c.reports);
    }
    if (j.contains("simulate")) {
      const auto& s = j.at("simulate");
      reject_unknown(s, {"profile", "profile_overrides", "n_dimms", "duration_days"}, "simulate");
      c.profile = s.value("profile", c.profile);
      if (s.contains("profile_overrides")) c.profile_overrides = s.at("profile_overrides");
      c.n_dimms = s.value("n_dimms", c.n_dimms);
      c.duration_days = s.value("duration_days", c.duration_days);
    }
    if (j.contains("ingest")) {
      const auto& in = j.at("ingest");
      reject_unknown(in, {"input", "format", "column_map", "max_reject_rate"}, "ingest");
      if (in.contains("input") && !in.at("input").is_null()) c.ingest_input = in.at("input").get<std::string>();
      c.ingest_format = in.value("format", c.ingest_format);
      if (in.contains("column_map")) c.column_map = ColumnMap::from_json(in.at("column_map"));
      c.max_reject_rate = in.value("max_reject_rate", c.max_reject_rate);
    }
    if (j.contains("features")) c.features_config = FeatureConfig::from_json(j.at("features"));
    if (j.contains("sample_mode")) {
      const auto m = j.at("sample_mode").get<std::string>();
      if (m != "batch" && m != "stream") throw Error(ErrorCode::config, "sample_mode must be batch or stream");
      c.sample_mode = m == "batch" ? SampleMode::batch : SampleMode::stream;
    }
    if (j.contains("train")) c.train = TrainOptions::from_json(j.at("train"));
    c.holdout_fraction = j.value("holdout_fraction", c.holdout_fraction);
    c.threshold = j.value("threshold", c.threshold);
    c.y_c = j.value("y_c", c.y_c);
    c.v_a = j.value("v_a", c.v_a);
    c.tick_level = j.value("tick_level", c.tick_level);
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config, std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

fs::path PipelineConfig::path(const std::string& name) const {
  const fs::path p(name);
  return p.is_absolute() ? p : work_dir / p;
}

std::string PipelineConfig::hash() const {
  json j = to_json();
  j.erase("threads");
  j.erase("work_dir");
  return hex64(fnv1a64(j.dump()));
}

PipelineConfig load_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::config, "cannot open config " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config, fmt::format("config {}: {}", file.string(), e.what()));
  }
  return PipelineConfig::from_json(j);
}

bool in_holdout(const DimmId& dimm, double fraction, std::uint64_t seed) {
  const std::uint64_t h = mix64(fnv1a64(dimm.to_string()) ^ mix64(seed));
  return static_cast<double>(h >> 11) * 0x1.0p-53 < fraction;
}

namespace {

std::ifstream open_input(const fs::path& p, const char* what) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::missing_prerequisite, fmt::format("{} not found: {}", what, p.generic_string()));
  return in;
}

std::ofstream open_output(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write " + p.generic_string());
  return out;
}

void write_json(const fs::path& p, const json& j) {
  auto out = open_output(p);
  out << j.dump(2) << '\n';
}

void write_text(const fs::path& p, const std::string& text) {
  auto out = open_output(p);
  out << text;
}

json read_json(const fs::path& p, const char* what) {
  auto in = open_input(p, what);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::malformed_record, fmt::format("{} {}: {}", what, p.generic_string(), e.what()));
  }
}

class StageContext {
 public:
  explicit StageContext(const PipelineConfig& cfg) : cfg_(cfg), schema_(cfg.features_config) {}

  const PipelineConfig& cfg() const { return cfg_; }
  const FeatureSchema& schema() const { return schema_; }

  json header(Stage stage) const {
    return {{"stage", std::string(to_string(stage))},
            {"tool_version", kToolVersion},
            {"config_hash", cfg_.hash()},
            {"schema_hash", schema_.hash()},
            {"seed", cfg_.seed}};
  }

  fs::path report_path(Stage stage) const {
    return cfg_.path(cfg_.reports) / (std::string(to_string(stage)) + ".json");
  }

  // Validated trace from the trace and meta artifacts.
  ValidatedTrace load_trace() const {
    auto meta_in = open_input(cfg_.path(cfg_.meta), "meta file");
    const auto meta = read_meta_json(meta_in);
    auto trace_in = open_input(cfg_.path(cfg_.trace), "trace file");
    auto parsed = parse_jsonl_trace(trace_in);
    if (!parsed.rejects.empty()) {
      const auto& r = parsed.rejects.front();
      throw Error(ErrorCode::malformed_record,
                  fmt::format("trace line {} column {}: {}", r.line, r.column,
                              r.diagnostics.empty() ? std::string("rejected") : r.diagnostics.front()));
    }
    return validate_trace(std::move(parsed.events), meta);
  }

 private:
  const PipelineConfig& cfg_;
  FeatureSchema schema_;
};

PlatformProfile resolve_profile(const PipelineConfig& cfg) {
  const auto base = builtin_profile(cfg.profile);
  return cfg.profile_overrides.empty() ? base : PlatformProfile::from_json(cfg.profile_overrides, base);
}

json summary_json(const ValidationSummary& s) {
  return {{"input_ces", s.input_ces},
          {"input_ues", s.input_ues},
          {"rejected_ces", s.rejected_ces},
          {"rejected_ues", s.rejected_ues},
          {"sudden_flags_changed", s.sudden_flags_changed},
          {"issues", s.issues.size()}};
}

fs::path stage_simulate(const StageContext& ctx) {
  const auto& cfg = ctx.cfg();
  const auto profile = resolve_profile(cfg);
  auto sim = generate_trace(profile, cfg.n_dimms, cfg.duration_days, cfg.seed);
  {
    auto out = open_output(cfg.path(cfg.trace));
    write_trace_jsonl(out, sim.events);
  }
  {
    auto out = open_output(cfg.path(cfg.meta));
    write_meta_json(out, sim.meta);
  }
  write_json(cfg.path(cfg.truth), sim.truth.to_json());

  const auto trace = validate_trace(sim.events, sim.meta);
  std::size_t ue_dimms = 0;
  std::size_t predictable = 0;
  for (const auto& d : trace.ue_dimms()) {
    ++ue_dimms;
    if (!trace.ues_of(d).front().sudden) ++predictable;
  }
  auto report = ctx.header(Stage::simulate);
  report["profile"] = profile.to_json();
  report["n_dimms"] = cfg.n_dimms;
  report["duration_days"] = cfg.duration_days;
  report["ces"] = sim.events.ces.size();
  report["ues"] = sim.events.ues.size();
  report["ue_dimms"] = ue_dimms;
  report["predictable_ue_fraction"] =
      ue_dimms > 0 ? json(static_cast<double>(predictable) / static_cast<double>(ue_dimms)) : json(nullptr);
  report["ground_truth"] = verify_ground_truth(trace, sim.truth, cfg.features_config.thresholds).to_json();
  const auto path = ctx.report_path(Stage::simulate);
  write_json(path, report);
  return path;
}

fs::path stage_ingest(const StageContext& ctx) {
  const auto& cfg = ctx.cfg();
  if (!cfg.ingest_input) throw Error(ErrorCode::config, "ingest.input is not set");
  auto meta_in = open_input(cfg.path(cfg.meta), "meta file");
  const auto meta = read_meta_json(meta_in);
  IngestResult parsed;
  {
    auto in = open_input(*cfg.ingest_input, "ingest input");
    const IngestOptions options{cfg.max_reject_rate};
    parsed = cfg.ingest_format == "csv" ? parse_csv_trace(in, cfg.column_map, options) : parse_jsonl_trace(in, options);
  }
  const auto trace = validate_trace(std::move(parsed.events), meta);
  {
    auto out = open_output(cfg.path(cfg.trace));
    write_trace_jsonl(out, trace.ces(), trace.ues());
  }
  auto report = ctx.header(Stage::ingest);
  report["format"] = cfg.ingest_format;
  report["data_lines"] = parsed.data_lines;
  json rejects = json::array();
  for (const auto& r : parsed.rejects) rejects.push_back(to_json(r));
  report["rejects"] = rejects;
  report["validation"] = summary_json(trace.summary());
  const auto path = ctx.report_path(Stage::ingest);
  write_json(path, report);
  return path;
}

fs::path stage_analyze(const StageContext& ctx) {
  const auto& cfg = ctx.cfg();
  const auto trace = filter_predictable_population(ctx.load_trace());
  std::vector<FaultDiagnosis> diagnoses;
  std::set<DimmId> ue_dimms;
  json dimms = json::array();
  for (const auto& d : trace.dimms()) {
    auto ces = trace.ces_of(d);
    const auto ues = trace.ues_of(d);
    const bool failed = !ues.empty();
    if (failed) {
      ue_dimms.insert(d);
      const Timestamp first_ue = ues.front().timestamp;
      const auto n = std::lower_bound(ces.begin(), ces.end(), first_ue,
                                      [](const CeEvent& e, Timestamp t) { return e.timestamp < t; }) -
                     ces.begin();
      ces = ces.first(static_cast<std::size_t>(n));
    }
    auto diag = classify_faults(ces, cfg.features_config.thresholds);
    diag.dimm = d;
    diagnoses.push_back(diag);
    auto entry = to_json(diag);
    entry["ue"] = failed;
    entry["bit_patterns"] = to_json(aggregate_bit_patterns(ces, TimeRange::all(), cfg.features_config.interval_mode));
    dimms.push_back(std::move(entry));
  }
  json rates = json::object();
  for (const auto& [mode, r] : relative_ue_rate(diagnoses, ue_dimms)) {
    rates[std::string(to_string(mode))] = {{"rate", r.rate}, {"population", r.population}, {"ue_dimms", r.ue_dimms}};
  }
  auto report = ctx.header(Stage::analyze);
  report["thresholds"] = to_json(cfg.features_config.thresholds);
  report["population"] = diagnoses.size();
  report["ue_dimms"] = ue_dimms.size();
  report["relative_ue_rate"] = rates;
  report["dimms"] = dimms;
  const auto path = ctx.report_path(Stage::analyze);
  write_json(path, report);
  return path;
}

fs::path stage_featurize(const StageContext& ctx) {
  const auto& cfg = ctx.cfg();
  const auto trace = filter_predictable_population(ctx.load_trace());
  const auto set = build_samples(trace, ctx.schema(), cfg.sample_mode, cfg.threads);
  {
    auto out = open_output(cfg.path(cfg.features));
    write_feature_csv(out, ctx.schema(), set.samples);
  }
  write_json(cfg.path(cfg.schema), ctx.schema().to_json());
  std::size_t positives = 0;
  for (const auto& s : set.samples) positives += s.label == Label::positive;
  json unknown = json::array();
  for (const auto& d : set.unknown_category_dimms) unknown.push_back(d.to_string());
  auto report = ctx.header(Stage::featurize);
  report["sample_mode"] = cfg.sample_mode == SampleMode::batch ? "batch" : "stream";
  report["samples"] = set.samples.size();
  report["positives"] = positives;
  report["features"] = ctx.schema().size();
  report["unknown_category_dimms"] = unknown;
  const auto path = ctx.report_path(Stage::featurize);
  write_json(path, report);
  return path;
}

FeatureMatrix load_matrix(const PipelineConfig& cfg) {
  auto in = open_input(cfg.path(cfg.features), "feature matrix");
  return read_feature_csv(in);
}

fs::path stage_train(const StageContext& ctx) {
  const auto& cfg = ctx.cfg();
  auto matrix = load_matrix(cfg);
  if (cfg.holdout_fraction > 0.0) {
    std::erase_if(matrix.samples, [&](const Sample& s) { return in_holdout(s.dimm, cfg.holdout_fraction, cfg.seed); });
  }
  auto options = cfg.train;
  options.forest.threads = cfg.threads;
  const auto model = train_model(matrix, options, cfg.seed);
  {
    auto out = open_output(cfg.path(cfg.model));
    out << model.to_json().dump() << '\n';
  }
  std::size_t positives = 0;
  for (const auto& s : matrix.samples) positives += s.label == Label::positive;
  auto report = ctx.header(Stage::train);
  report["model_kind"] = std::string(to_string(model.kind()));
  report["model_schema_hash"] = model.schema_hash();
  report["train_samples"] = matrix.samples.size();
  report["train_positives"] = positives;
  report["options"] = options.to_json();
  if (const auto* g = std::get_if<GbdtModel>(&model.body()); g && !g->loss_trace.empty()) {
    report["final_loss"] = g->loss_trace.back();
  }
  const auto path = ctx.report_path(Stage::train);
  write_json(path, report);
  return path;
}

fs::path stage_predict(const StageContext& ctx) {
  const auto& cfg = ctx.cfg();
  const auto model = Model::from_json(read_json(cfg.path(cfg.model), "model file"));
  const auto matrix = load_matrix(cfg);
  if (model.schema_hash() != matrix.schema_hash) {
    throw Error(ErrorCode::schema_mismatch, fmt::format("model schema {} does not match feature matrix schema {}",
                                                        model.schema_hash(), matrix.schema_hash));
  }
  if (matrix.feature_names != model.feature_names()) {
    throw Error(ErrorCode::schema_mismatch, "feature names differ between model and feature matrix");
  }
  std::vector<PredictionRecord> preds;
  for (const auto& s : matrix.samples) {
    if (cfg.holdout_fraction > 0.0 && !in_holdout(s.dimm, cfg.holdout_fraction, cfg.seed)) continue;
    const auto p = predict(model, matrix.schema_hash, s.features, cfg.threshold);
    preds.push_back({s.dimm, s.t, p.score, p.positive});
  }
  {
    auto out = open_output(cfg.path(cfg.predictions));
    write_predictions_csv(out, preds);
  }
  std::size_t positives = 0;
  for (const auto& p : preds) positives += p.positive;
  auto report = ctx.header(Stage::predict);
  report["model_kind"] = std::string(to_string(model.kind()));
  report["threshold"] = cfg.threshold;
  report["predictions"] = preds.size();
  report["positive_predictions"] = positives;
  const auto path = ctx.report_path(Stage::predict);
  write_json(path, report);
  return path;
}

fs::path stage_evaluate(const StageContext& ctx) {
  const auto& cfg = ctx.cfg();
  std::vector<PredictionRecord> preds;
  {
    auto in = open_input(cfg.path(cfg.predictions), "predictions file");
    preds = read_predictions_csv(in);
  }
  const auto trace = filter_predictable_population(ctx.load_trace());
  std::vector<DimmId> population;
  for (const auto& d : trace.dimms()) {
    if (cfg.holdout_fraction == 0.0 || in_holdout(d, cfg.holdout_fraction, cfg.seed)) population.push_back(d);
  }
  const EvalOptions options{cfg.y_c, cfg.v_a, cfg.tick_level};
  const auto eval = evaluate(preds, trace, population, cfg.features_config.window, options);
  {
    auto out = open_output(cfg.path(cfg.outcomes));
    write_outcomes_csv(out, eval.outcomes);
  }
  auto report = ctx.header(Stage::evaluate);
  report["population"] = population.size();
  report["threshold"] = cfg.threshold;
  report["evaluation"] = eval.to_json();
  const auto path = ctx.report_path(Stage::evaluate);
  write_json(path, report);
  return path;
}

fs::path stage_report(const StageContext& ctx) {
  const auto& cfg = ctx.cfg();
  const auto analysis = read_json(ctx.report_path(Stage::analyze), "analysis report");
  const auto tables = emit_fig_tables(analysis);
  const auto dir = cfg.path(cfg.reports);
  write_json(dir / "fig_tables.json", tables.json);
  write_text(dir / "relative_ue_rate.csv", tables.mode_csv);
  write_text(dir / "bit_pattern_ue_rate.csv", tables.pattern_csv);

  auto report = ctx.header(Stage::report);
  report["fig_tables"] = tables.json;
  const auto eval_path = ctx.report_path(Stage::evaluate);
  if (fs::exists(eval_path)) {
    const auto eval = read_json(eval_path, "evaluation report");
    const auto& e = eval.at("evaluation");
    report["evaluation"] = {{"confusion", e.at("confusion")},
                            {"precision", e.at("precision")},
                            {"recall", e.at("recall")},
                            {"f1", e.at("f1")},
                            {"virr", e.at("virr")}};
  }
  const auto path = ctx.report_path(Stage::report);
  write_json(path, report);
  return path;
}

}  // namespace

StageResult run_stage(Stage stage, const PipelineConfig& config) {
  StageResult r;
  try {
    config.validate();
    const StageContext ctx(config);
    switch (stage) {
      case Stage::simulate: r.report = stage_simulate(ctx); break;
      case Stage::ingest: r.report = stage_ingest(ctx); break;
      case Stage::analyze: r.report = stage_analyze(ctx); break;
      case Stage::featurize: r.report = stage_featurize(ctx); break;
      case Stage::train: r.report = stage_train(ctx); break;
      case Stage::predict: r.report = stage_predict(ctx); break;
      case Stage::evaluate: r.report = stage_evaluate(ctx); break;
      case Stage::report: r.report = stage_report(ctx); break;
    }
  } catch (const Error& e) {
    r.exit_code = exit_status(e.code());
    r.error = e.what();
  } catch (const fs::filesystem_error& e) {
    r.exit_code = exit_status(ErrorCode::io);
    r.error = e.what();
  } catch (const json::exception& e) {
    r.exit_code = exit_status(ErrorCode::malformed_record);
    r.error = e.what();
  }
  return r;
}

StageResult run_pipeline(const PipelineConfig& config) {
  const Stage first = config.ingest_input ? Stage::ingest : Stage::simulate;
  StageResult last;
  for (auto stage : {first, Stage::analyze, Stage::featurize, Stage::train, Stage::predict, Stage::evaluate,
                     Stage::report}) {
    last = run_stage(stage, config);
    if (last.exit_code != 0) return last;
  }
  return last;
}

FigTables emit_fig_tables(const json& analysis) {
  struct Tally {
    int population = 0;
    int ue_dimms = 0;
  };
  static const char* kStats[] = {"dq_count", "beat_count", "dq_interval", "beat_interval"};
  std::map<std::string, Tally> modes;
  std::map<std::string, std::map<int, Tally>> patterns;
  std::vector<FaultDiagnosis> diagnoses;
  std::set<DimmId> failed;
  const json empty = json::array();
  const auto& dimms = analysis.contains("dimms") ? analysis.at("dimms") : empty;
  for (const auto& d : dimms) {
    const bool ue = d.at("ue").get<bool>();
    FaultDiagnosis diag;
    diag.dimm.server_id = d.at("dimm").get<std::string>();
    diag.cell_faults = d.at("cell_faults").get<int>();
    diag.row_faults = d.at("row_faults").get<int>();
    diag.column_faults = d.at("column_faults").get<int>();
    diag.bank_faults = d.at("bank_faults").get<int>();
    const auto scope = d.at("device_scope").get<std::string>();
    diag.device_scope = scope == "multi_device"    ? DeviceScope::multi_device
                        : scope == "single_device" ? DeviceScope::single_device
                                                   : DeviceScope::none;
    if (ue) failed.insert(diag.dimm);
    diagnoses.push_back(diag);
    const auto& bp = d.at("bit_patterns");
    for (const char* stat : kStats) {
      auto& t = patterns[stat][bp.at(stat).get<int>()];
      ++t.population;
      t.ue_dimms += ue ? 1 : 0;
    }
  }

  FigTables out;
  out.mode_csv = "mode,population,ue_dimms,rate\n";
  out.pattern_csv = "stat,value,population,ue_dimms,rate\n";
  json mode_rows = json::array();
  for (const auto& [mode, r] : relative_ue_rate(diagnoses, failed)) {
    const std::string name(to_string(mode));
    mode_rows.push_back({{"mode", name}, {"population", r.population}, {"ue_dimms", r.ue_dimms}, {"rate", r.rate}});
    out.mode_csv += fmt::format("{},{},{},{}\n", name, r.population, r.ue_dimms, r.rate);
  }
  json pattern_tables = json::object();
  for (const char* stat : kStats) {
    json rows = json::array();
    if (const auto it = patterns.find(stat); it != patterns.end()) {
      for (const auto& [value, t] : it->second) {
        const double rate = static_cast<double>(t.ue_dimms) / static_cast<double>(t.population);
        rows.push_back({{"value", value}, {"population", t.population}, {"ue_dimms", t.ue_dimms}, {"rate", rate}});
        out.pattern_csv += fmt::format("{},{},{},{},{}\n", stat, value, t.population, t.ue_dimms, rate);
      }
    }
    pattern_tables[stat] = rows;
  }
  out.json = {{"relative_ue_rate", mode_rows}, {"bit_patterns", pattern_tables}};
  return out;
}

}  // namespace memfail
