// memfail: command-line front end for the memory-failure prediction pipeline.
//
// Environment overrides (used when the matching flag is absent):
//   MEMFAIL_CONFIG, MEMFAIL_SEED, MEMFAIL_THREADS, MEMFAIL_WORK_DIR

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "memfail/error.hpp"
#include "memfail/pipeline.hpp"

namespace {

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string work_dir;
};

struct StageOptions {
  std::string profile;
  std::optional<std::size_t> n_dimms;
  std::optional<double> days;
  std::string input;
  std::string format;
  std::optional<double> threshold;
};

memfail::PipelineConfig resolve(const GlobalOptions& g, const StageOptions& s) {
  auto cfg = g.config.empty() ? memfail::PipelineConfig{} : memfail::load_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  if (g.threads) cfg.threads = *g.threads;
  if (!g.work_dir.empty()) cfg.work_dir = g.work_dir;
  if (!s.profile.empty()) cfg.profile = s.profile;
  if (s.n_dimms) cfg.n_dimms = *s.n_dimms;
  if (s.days) cfg.duration_days = *s.days;
  if (!s.input.empty()) cfg.ingest_input = s.input;
  if (!s.format.empty()) cfg.ingest_format = s.format;
  if (s.threshold) cfg.threshold = *s.threshold;
  cfg.validate();
  return cfg;
}

int report(const memfail::StageResult& r) {
  if (r.exit_code != 0) {
    std::cerr << "memfail: " << r.error << '\n';
  } else {
    std::cout << r.report.generic_string() << '\n';
  }
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Memory failure analysis and prediction pipeline"};
  app.set_version_flag("--version", std::string(memfail::kToolVersion));
  app.require_subcommand(1);

  GlobalOptions g;
  StageOptions s;
  app.add_option("--config", g.config, "Pipeline config JSON")->envname("MEMFAIL_CONFIG");
  app.add_option("--seed", g.seed, "Top-level seed")->envname("MEMFAIL_SEED");
  app.add_option("--threads", g.threads, "Worker threads")->envname("MEMFAIL_THREADS")->check(CLI::PositiveNumber);
  app.add_option("--work-dir", g.work_dir, "Artifact directory")->envname("MEMFAIL_WORK_DIR");

  std::optional<memfail::Stage> stage;
  bool whole = false;

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic trace with ground truth");
  sim->add_option("--profile", s.profile, "purley, whitley or k920");
  sim->add_option("--dimms", s.n_dimms, "Number of DIMMs");
  sim->add_option("--days", s.days, "Trace duration in days");
  sim->callback([&] { stage = memfail::Stage::simulate; });

  auto* ing = app.add_subcommand("ingest", "Parse and validate a raw event log");
  ing->add_option("--input", s.input, "Raw log file");
  ing->add_option("--format", s.format, "jsonl or csv");
  ing->callback([&] { stage = memfail::Stage::ingest; });

  app.add_subcommand("analyze", "Classify fault modes and relative UE rates")->callback([&] {
    stage = memfail::Stage::analyze;
  });
  app.add_subcommand("featurize", "Build the labelled feature matrix")->callback([&] {
    stage = memfail::Stage::featurize;
  });
  app.add_subcommand("train", "Train a predictor on the training DIMMs")->callback([&] {
    stage = memfail::Stage::train;
  });
  auto* pred = app.add_subcommand("predict", "Score the holdout DIMMs");
  pred->add_option("--threshold", s.threshold, "Positive score threshold");
  pred->callback([&] { stage = memfail::Stage::predict; });
  app.add_subcommand("evaluate", "Match predictions to UEs and compute metrics")->callback([&] {
    stage = memfail::Stage::evaluate;
  });
  app.add_subcommand("report", "Emit relative-UE-rate tables")->callback([&] {
    stage = memfail::Stage::report;
  });

  auto* run = app.add_subcommand("run", "Run every stage in order");
  run->add_option("--profile", s.profile, "purley, whitley or k920");
  run->add_option("--dimms", s.n_dimms, "Number of DIMMs");
  run->add_option("--days", s.days, "Trace duration in days");
  run->add_option("--input", s.input, "Raw log file to ingest instead of simulating");
  run->add_option("--format", s.format, "jsonl or csv");
  run->add_option("--threshold", s.threshold, "Positive score threshold");
  run->callback([&] { whole = true; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  memfail::PipelineConfig cfg;
  try {
    cfg = resolve(g, s);
  } catch (const memfail::Error& e) {
    std::cerr << "memfail: " << e.what() << '\n';
    return memfail::exit_status(e.code());
  }
  if (whole) return report(memfail::run_pipeline(cfg));
  return report(memfail::run_stage(*stage, cfg));
}
