// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sfda/deployment.hpp"
#include "sfda/label_space.hpp"
#include "sfda/nn.hpp"

namespace sfda {

// Prediction token for "any negative class".
inline constexpr ClassId kUnknown = -1;

// Argmax over all K logits (ties go to the lowest index). Positive indices are
// returned as-is; negative indices map to kUnknown.
ClassId predict_with_unknown(std::span<const double> logits, int num_positive);
std::vector<ClassId> predict_with_unknown(const Matrix& logits, int num_positive);

struct PredictionRecord {
  std::string sample_id;
  ClassId predicted = kUnknown;
  ClassId true_label = 0;
  std::optional<SsmWeight> ssm;
};

struct ClassScore {
  long count = 0;
  long correct = 0;
  double accuracy = 0.0;
};

// Per-class accuracy over the shared classes that have target samples, plus an
// "unknown" row (key kUnknown) for target-private truth when any is present.
struct MetricReport {
  double t_avg = 0.0;
  std::optional<double> t_unk;  // absent when no target-private samples exist
  std::map<ClassId, ClassScore> per_class;
};

// True labels in the target-private set are scored as "unknown". Throws
// kData when a true label is not in the target label set.
MetricReport evaluate(std::span<const PredictionRecord> predictions,
                      const LabelSpace& label_space);

struct SsmHistogram {
  static constexpr int kDefaultBins = 20;
  double lo = 1.0;
  double hi = 0.0;  // e
  std::map<std::string, std::vector<long>> counts;
  std::map<std::string, double> means;
};

// Fixed-width bins over [1, e]; values outside are clamped to the end bins.
SsmHistogram ssm_histogram(
    const std::map<std::string, std::vector<double>>& populations,
    int bins = SsmHistogram::kDefaultBins);

// Nearest-centre (Euclidean) assignment in u-space. Throws
// kInvalidConfiguration when a class appears twice among the centres.
double one_shot_recognition(const Matrix& center_embeddings,
                            std::span<const ClassId> center_labels,
                            const Matrix& probe_embeddings,
                            std::span<const ClassId> probe_labels);

// Embeds both sets through Ft o M of the adapted model.
double one_shot_recognition(const DeploymentModel& model,
                            const Matrix& one_shot_inputs,
                            std::span<const ClassId> one_shot_labels,
                            const Matrix& probe_inputs,
                            std::span<const ClassId> probe_labels);

struct GridSpec {
  int universe = 10;
  std::vector<int> source_private;  // row values of |source-private|
  std::vector<int> target_private;  // column values of |target-private|
};

struct GridCell {
  int source_private = 0;
  int target_private = 0;
  bool feasible = false;
  std::optional<MetricReport> report;
};

// Label space of one cell: classes [0, universe) with the first
// `source_private` owned by the source only and the last `target_private` by
// the target only. Returns nullopt when fewer than 2 source classes remain or
// the shared count would be negative.
std::optional<LabelSpace> grid_label_space(int universe, int source_private,
                                           int target_private);

using GridRunner =
    std::function<MetricReport(const LabelSpace&, std::size_t cell_index)>;

// Row-major over (source_private x target_private). Infeasible cells are
// marked and skipped.
std::vector<GridCell> category_gap_grid(const GridSpec& spec,
                                        const GridRunner& runner);

}  // namespace sfda
