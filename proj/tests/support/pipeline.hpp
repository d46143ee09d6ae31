// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

// Helpers shared by the integration and acceptance suites: the desk-scale
// synthetic task configuration and the SSM population statistics.

#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sfda/checkpoint.hpp"
#include "sfda/deployment.hpp"
#include "sfda/harness/commands.hpp"
#include "sfda/harness/config.hpp"
#include "sfda/harness/corpus.hpp"

namespace sfda::testing {

// Six source classes, four shared, three target-private, 50 images per class
// at 32x32. Training budgets found to saturate the source fit on this task.
inline harness::ExperimentConfig synthetic_task_config(const std::filesystem::path& root,
                                                       const std::string& run_name,
                                                       std::uint64_t seed) {
  harness::ExperimentConfig c = harness::default_config();
  c.seed = seed;
  c.output_root = root.string();
  c.run_name = run_name;
  c.model.backbone.kind = BackboneSpec::Kind::kConv;
  c.negatives.per_class = 20;
  c.procurement.pretrain_steps = 500;
  c.procurement.pretrain_learning_rate = 1e-3;
  c.procurement.max_iter = 8000;
  c.procurement.learning_rate = 1e-3;
  c.adaptation.learning_rate = 1e-4;
  c.adaptation.iterations = 20;
  c.validate();
  return c;
}

struct PopulationMeans {
  double source_shared = 0.0;
  double target_shared = 0.0;
  double target_private = 0.0;
  double negative = 0.0;
};

inline double mean_w(const DeploymentModel& model, const Matrix& inputs) {
  const auto ssm = model.ssm(model.backbone_features(inputs));
  double sum = 0.0;
  for (const auto& s : ssm) sum += s.w;
  return sum / static_cast<double>(ssm.size());
}

// Rows of `corpus` whose class name is (or is not) one of `source`.
inline Matrix select(const std::vector<harness::LabeledImage>& corpus,
                     const std::vector<std::string>& names,
                     const std::vector<std::string>& source, bool shared) {
  std::vector<Image> picked;
  for (const auto& img : corpus) {
    const std::string& name = names[static_cast<std::size_t>(img.label)];
    const bool in_source = std::find(source.begin(), source.end(), name) != source.end();
    if (in_source == shared) picked.push_back(img.image);
  }
  return harness::to_matrix(picked);
}

inline std::vector<std::string> class_dirs(const std::filesystem::path& root) {
  std::vector<std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(root)) {
    if (e.is_directory()) out.push_back(e.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Mean SSM weight w of each population under the procured model. Run after
// synth-negatives and procure.
inline PopulationMeans population_means(const harness::ExperimentConfig& c) {
  using harness::DataDomain;
  const Checkpoint ck =
      load_checkpoint(c.output_dir() / harness::layout::kProcurementCheckpoint);
  const DeploymentModel model(ck.model, ck.priors);
  const auto& source = ck.labels.source_class_names;
  const auto target = class_dirs(c.target_root());
  const auto src = harness::load_labeled_corpus(c.source_root(), source, DataDomain::kSource);
  const auto tgt = harness::load_labeled_corpus(c.target_root(), target, DataDomain::kTarget);
  // Source-shared: source images of the classes the target also has.
  std::vector<std::string> shared;
  for (const auto& name : target) {
    if (std::find(source.begin(), source.end(), name) != source.end()) shared.push_back(name);
  }

  PopulationMeans m;
  m.source_shared = mean_w(model, select(src, source, shared, true));
  m.target_shared = mean_w(model, select(tgt, target, source, true));
  m.target_private = mean_w(model, select(tgt, target, source, false));
  m.negative = mean_w(model, harness::to_matrix(harness::load_unlabeled_corpus(
                                 c.output_dir() / harness::layout::kNegatives,
                                 DataDomain::kNegative)));
  return m;
}

}  // namespace sfda::testing
