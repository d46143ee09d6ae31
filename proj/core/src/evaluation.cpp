// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#include "sfda/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "sfda/error.hpp"

namespace sfda {

ClassId predict_with_unknown(std::span<const double> logits, int num_positive) {
  if (logits.empty()) fail(ErrorKind::kInvalidInput, "empty logit vector");
  // max_element returns the first maximum, which gives the lowest-index tie
  // break.
  const auto best = static_cast<int>(
      std::max_element(logits.begin(), logits.end()) - logits.begin());
  return best < num_positive ? best : kUnknown;
}

std::vector<ClassId> predict_with_unknown(const Matrix& logits, int num_positive) {
  std::vector<ClassId> out;
  out.reserve(static_cast<std::size_t>(logits.rows()));
  std::vector<double> row(static_cast<std::size_t>(logits.cols()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    for (Eigen::Index k = 0; k < logits.cols(); ++k) row[k] = logits(i, k);
    out.push_back(predict_with_unknown(row, num_positive));
  }
  return out;
}

MetricReport evaluate(std::span<const PredictionRecord> predictions,
                      const LabelSpace& label_space) {
  MetricReport report;
  for (const auto& r : predictions) {
    if (!label_space.in_target(r.true_label)) {
      fail(ErrorKind::kData, "sample '" + r.sample_id + "' has label " +
                                 std::to_string(r.true_label) +
                                 " outside the target label set");
    }
    const ClassId truth =
        label_space.is_target_private(r.true_label) ? kUnknown : r.true_label;
    ClassScore& row = report.per_class[truth];
    ++row.count;
    if (r.predicted == truth) ++row.correct;
  }
  double sum = 0.0;
  for (auto& [cls, row] : report.per_class) {
    row.accuracy = static_cast<double>(row.correct) / static_cast<double>(row.count);
    sum += row.accuracy;
  }
  if (!report.per_class.empty()) {
    report.t_avg = sum / static_cast<double>(report.per_class.size());
  }
  if (auto it = report.per_class.find(kUnknown); it != report.per_class.end()) {
    report.t_unk = it->second.accuracy;
  }
  return report;
}

SsmHistogram ssm_histogram(
    const std::map<std::string, std::vector<double>>& populations, int bins) {
  if (bins < 1) fail(ErrorKind::kInvalidConfiguration, "need at least one bin");
  SsmHistogram h;
  h.lo = 1.0;
  h.hi = std::numbers::e;
  const double width = (h.hi - h.lo) / bins;
  for (const auto& [name, values] : populations) {
    std::vector<long> counts(static_cast<std::size_t>(bins), 0);
    double sum = 0.0;
    for (double w : values) {
      int b = static_cast<int>(std::floor((w - h.lo) / width));
      b = std::clamp(b, 0, bins - 1);
      ++counts[static_cast<std::size_t>(b)];
      sum += w;
    }
    h.counts[name] = std::move(counts);
    h.means[name] = values.empty() ? 0.0 : sum / static_cast<double>(values.size());
  }
  return h;
}

double one_shot_recognition(const Matrix& center_embeddings,
                            std::span<const ClassId> center_labels,
                            const Matrix& probe_embeddings,
                            std::span<const ClassId> probe_labels) {
  if (static_cast<std::size_t>(center_embeddings.rows()) != center_labels.size() ||
      static_cast<std::size_t>(probe_embeddings.rows()) != probe_labels.size()) {
    fail(ErrorKind::kInvalidInput, "embedding/label count mismatch");
  }
  if (center_labels.empty()) {
    fail(ErrorKind::kInvalidConfiguration, "no one-shot samples");
  }
  std::set<ClassId> seen;
  for (ClassId c : center_labels) {
    if (!seen.insert(c).second) {
      fail(ErrorKind::kInvalidConfiguration,
           "class " + std::to_string(c) + " has more than one one-shot sample");
    }
  }
  if (probe_labels.empty()) return 0.0;
  long correct = 0;
  for (Eigen::Index i = 0; i < probe_embeddings.rows(); ++i) {
    Eigen::Index best = 0;
    (center_embeddings.rowwise() - probe_embeddings.row(i))
        .rowwise()
        .squaredNorm()
        .minCoeff(&best);
    if (center_labels[static_cast<std::size_t>(best)] ==
        probe_labels[static_cast<std::size_t>(i)]) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(probe_labels.size());
}

double one_shot_recognition(const DeploymentModel& model,
                            const Matrix& one_shot_inputs,
                            std::span<const ClassId> one_shot_labels,
                            const Matrix& probe_inputs,
                            std::span<const ClassId> probe_labels) {
  const Matrix centers =
      model.target_embedding(model.backbone_features(one_shot_inputs));
  const Matrix probes = model.target_embedding(model.backbone_features(probe_inputs));
  return one_shot_recognition(centers, one_shot_labels, probes, probe_labels);
}

std::optional<LabelSpace> grid_label_space(int universe, int source_private,
                                           int target_private) {
  const int shared = universe - source_private - target_private;
  if (source_private < 0 || target_private < 0 || shared < 0 ||
      source_private + shared < 2) {
    return std::nullopt;
  }
  std::vector<ClassId> source, target;
  for (int c = 0; c < source_private + shared; ++c) source.push_back(c);
  for (int c = source_private; c < universe; ++c) target.push_back(c);
  if (target.empty()) return std::nullopt;
  return LabelSpace::make(std::move(source), std::move(target));
}

std::vector<GridCell> category_gap_grid(const GridSpec& spec,
                                        const GridRunner& runner) {
  std::vector<GridCell> cells;
  std::size_t index = 0;
  for (int sp : spec.source_private) {
    for (int tp : spec.target_private) {
      GridCell cell;
      cell.source_private = sp;
      cell.target_private = tp;
      if (auto ls = grid_label_space(spec.universe, sp, tp)) {
        cell.feasible = true;
        cell.report = runner(*ls, index);
      }
      cells.push_back(std::move(cell));
      ++index;
    }
  }
  return cells;
}

}  // namespace sfda
