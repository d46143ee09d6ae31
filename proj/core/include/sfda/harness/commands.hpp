// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "sfda/error.hpp"
#include "sfda/evaluation.hpp"
#include "sfda/harness/config.hpp"

namespace sfda::harness {

enum class Command {
  kGenSynthetic,
  kSynthNegatives,
  kProcure,
  kAdapt,
  kEval,
  kGrid,
  kSweepBeta,
};

std::string_view to_string(Command command);
std::optional<Command> parse_command(std::string_view name);
const std::vector<Command>& all_commands();

// Output layout, relative to ExperimentConfig::output_dir():
//   data/source, data/target            gen-synthetic
//   negatives/<rank>/<n>.png            synth-negatives
//   negatives/manifest.csv, labels.json synth-negatives
//   procurement.ckpt, procurement_trace.csv, procure.log
//   adapted.ckpt, adaptation_trace.csv, adapt.log
//   eval/{report.txt,report.csv,report.json,confusion.csv,predictions.csv,
//         ssm_histogram.csv,ssm_histogram.png}
//   grid/{grid.csv,grid_cells.csv,heatmap.png,cell_<sp>_<tp>/...}
//   sweep/{beta_sweep.csv,beta_<value>/...}  sweep-beta
//   error.json                          any failing command
namespace layout {
inline constexpr const char* kNegatives = "negatives";
inline constexpr const char* kNegativeManifest = "negatives/manifest.csv";
inline constexpr const char* kLabels = "labels.json";
inline constexpr const char* kProcurementCheckpoint = "procurement.ckpt";
inline constexpr const char* kProcurementTrace = "procurement_trace.csv";
inline constexpr const char* kProcureLog = "procure.log";
inline constexpr const char* kAdaptedCheckpoint = "adapted.ckpt";
inline constexpr const char* kAdaptationTrace = "adaptation_trace.csv";
inline constexpr const char* kAdaptLog = "adapt.log";
inline constexpr const char* kEval = "eval";
inline constexpr const char* kGrid = "grid";
inline constexpr const char* kSweep = "sweep";
inline constexpr const char* kError = "error.json";
}  // namespace layout

void cmd_gen_synthetic(const ExperimentConfig& config);
void cmd_synth_negatives(const ExperimentConfig& config);
void cmd_procure(const ExperimentConfig& config);
void cmd_adapt(const ExperimentConfig& config);
MetricReport cmd_eval(const ExperimentConfig& config);

struct GridProgress {
  std::size_t index = 0;
  int source_private = 0;
  int target_private = 0;
  bool feasible = false;
  bool resumed = false;  // report found on disk, cell not recomputed
};
using GridHook = std::function<void(const GridProgress&)>;

// Cells with a finished report on disk are reused. `hook` runs after each
// cell; exceptions it throws abort the grid.
std::vector<GridCell> cmd_grid(const ExperimentConfig& config, const GridHook& hook = {});

struct BetaSweepPoint {
  double beta = 0.0;
  MetricReport report;
};

// Adapts and evaluates once per `sweep.betas` value from the run's
// procurement checkpoint. Every point starts from the same Fs and seed.
std::vector<BetaSweepPoint> cmd_sweep_beta(const ExperimentConfig& config);

// Source class names: the configured list or the sorted class directories.
std::vector<std::string> source_class_names(const ExperimentConfig& config);

// Metric report as written to report.json / read back for resumed grid cells.
std::string report_to_json(const MetricReport& report,
                           const std::vector<std::string>& class_names);
MetricReport report_from_json(const std::string& text);

// Machine-readable record of a failed command.
void write_error_record(const std::filesystem::path& dir, std::string_view command,
                        ErrorKind kind, const std::string& message,
                        std::optional<long> step = std::nullopt);

// Runs one command. Errors are reported on `err` and in error.json under the
// run directory; the return value is the process exit status (0 ok, 2 config,
// 3 data, 4 training divergence).
int run_command(Command command, const ExperimentConfig& config, std::ostream& err);

}  // namespace sfda::harness
