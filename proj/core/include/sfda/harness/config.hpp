// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sfda/deployment.hpp"
#include "sfda/harness/synthetic.hpp"
#include "sfda/procurement.hpp"

namespace sfda::harness {

// Environment variable that overrides `output_root`.
inline constexpr const char* kOutputRootEnv = "SFDA_OUTPUT_ROOT";

struct DataConfig {
  // Empty roots mean the synthetic corpora under <run>/data.
  std::string source_root;
  std::string target_root;
  // Empty lists mean "every class directory, sorted by name".
  std::vector<std::string> source_classes;
  std::vector<std::string> target_classes;
};

struct SyntheticConfig {
  SyntheticTaskSpec task;
  std::vector<int> source_classes = {0, 1, 2, 3, 4, 5};
  std::vector<int> target_classes = {2, 3, 4, 5, 6, 7, 8};
};

struct NegativeConfig {
  std::int64_t requested = -1;  // -1: all C(|Cs|, 2) pairs
  int per_class = 20;
};

struct GridConfig {
  int universe = 10;
  std::vector<int> source_private = {0, 2, 4};
  std::vector<int> target_private = {0, 2, 4};
};

struct SweepConfig {
  std::vector<double> betas = {0.01, 0.05, 0.1, 0.5, 1.0};
};

struct EvalConfig {
  std::string checkpoint;  // empty: <run>/adapted.ckpt
  int histogram_bins = 20;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output_root = "runs";
  std::string run_name = "default";
  DataConfig data;
  SyntheticConfig synthetic;
  NegativeConfig negatives;
  ModelSpec model;  // backbone input shape is taken from the corpus
  ProcurementConfig procurement;
  AdaptationConfig adaptation;
  GridConfig grid;
  SweepConfig sweep;
  EvalConfig eval;

  std::filesystem::path output_dir() const { return std::filesystem::path(output_root) / run_name; }
  std::filesystem::path source_root() const;
  std::filesystem::path target_root() const;
  std::filesystem::path checkpoint_path() const;

  // Range checks on every section. Path existence is checked by the commands
  // that read them.
  void validate() const;
};

ExperimentConfig default_config();

// Full JSON document (pretty-printed, keys sorted).
std::string config_to_json(const ExperimentConfig& config);

// Parses a JSON document against the default schema: unknown keys and type
// mismatches are configuration errors. Missing keys keep their defaults.
ExperimentConfig config_from_json(const std::string& text);

// Applies `key.path=value` overrides. The value is parsed as JSON when it is
// valid JSON and taken as a string otherwise.
ExperimentConfig apply_overrides(const ExperimentConfig& config,
                                 const std::vector<std::string>& overrides);

// File (optional) -> overrides -> SFDA_OUTPUT_ROOT -> validate().
ExperimentConfig load_config(const std::optional<std::filesystem::path>& file,
                             const std::vector<std::string>& overrides);

}  // namespace sfda::harness
