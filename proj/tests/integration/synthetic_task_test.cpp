// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

// End-to-end runs of the desk-scale synthetic task, one per seed.

#include <map>
#include <memory>
#include <sstream>

#include <gtest/gtest.h>

#include "pipeline.hpp"
#include "sfda/checkpoint.hpp"
#include "sfda/deployment.hpp"
#include "sfda/harness/commands.hpp"
#include "sfda/harness/corpus.hpp"
#include "test_util.hpp"

namespace sfda::harness {
namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kSeeds[] = {0, 1, 2};

class SyntheticTaskTest : public ::testing::TestWithParam<std::uint64_t> {
 protected:
  static void SetUpTestSuite() { dir_ = std::make_unique<sfda::testing::TempDir>("integ"); }
  static void TearDownTestSuite() { dir_.reset(); }

  // Runs gen-synthetic, synth-negatives and procure once per seed.
  static const ExperimentConfig& procured(std::uint64_t seed) {
    static std::map<std::uint64_t, ExperimentConfig> done;
    auto it = done.find(seed);
    if (it != done.end()) return it->second;
    const auto c =
        sfda::testing::synthetic_task_config(dir_->path(), "seed" + std::to_string(seed), seed);
    for (Command cmd : {Command::kGenSynthetic, Command::kSynthNegatives, Command::kProcure}) {
      std::ostringstream err;
      EXPECT_EQ(run_command(cmd, c, err), 0) << err.str();
    }
    return done.emplace(seed, c).first->second;
  }

  static std::unique_ptr<sfda::testing::TempDir> dir_;
};

std::unique_ptr<sfda::testing::TempDir> SyntheticTaskTest::dir_;

double mean_max_probability(const DeploymentModel& model, const Matrix& v) {
  const Matrix p = softmax_rows(model.target_logits(v));
  return p.rowwise().maxCoeff().mean();
}

TEST_P(SyntheticTaskTest, SourceTrainAccuracyAtLeast95Percent) {
  const auto& c = procured(GetParam());
  const Checkpoint ck = load_checkpoint(c.output_dir() / layout::kProcurementCheckpoint);
  const auto corpus =
      load_labeled_corpus(c.source_root(), ck.labels.source_class_names, DataDomain::kSource);
  const Matrix p = ck.model.probabilities(to_matrix(corpus));
  long correct = 0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    Eigen::Index k;
    p.row(i).maxCoeff(&k);
    correct += k == corpus[i].label ? 1 : 0;
  }
  EXPECT_GE(static_cast<double>(correct) / p.rows(), 0.95);
}

TEST_P(SyntheticTaskTest, SharedTargetOutweighsPrivateTarget) {
  const auto m = sfda::testing::population_means(procured(GetParam()));
  EXPECT_GT(m.target_shared, m.target_private);
}

TEST_P(SyntheticTaskTest, AdaptationRaisesTargetConfidence) {
  const auto& c = procured(GetParam());
  const Checkpoint ck = load_checkpoint(c.output_dir() / layout::kProcurementCheckpoint);
  DeploymentModel model(ck.model, ck.priors);
  const Matrix inputs = to_matrix(load_unlabeled_corpus(c.target_root(), DataDomain::kTarget));
  const Matrix v = model.backbone_features(inputs);
  const double before = mean_max_probability(model, v);
  AdaptationConfig ac = c.adaptation;
  ac.seed = GetParam();
  run_adaptation(model, inputs, ac);
  EXPECT_GT(mean_max_probability(model, v), before);
}

INSTANTIATE_TEST_SUITE_P(Seeds, SyntheticTaskTest, ::testing::ValuesIn(kSeeds));

TEST(CategoryGapGridTest, TwoByTwoOverTenClassUniverse) {
  sfda::testing::TempDir dir("grid");
  auto c = sfda::testing::synthetic_task_config(dir.path(), "grid", 0);
  c.procurement.max_iter = 2000;
  c.grid.universe = 10;
  c.grid.source_private = {0, 2};
  c.grid.target_private = {0, 2};
  const auto cells = cmd_grid(c);
  ASSERT_EQ(cells.size(), 4u);
  for (const auto& cell : cells) {
    ASSERT_TRUE(cell.feasible);
    ASSERT_TRUE(cell.report.has_value());
    EXPECT_GE(cell.report->t_avg, 0.0);
    EXPECT_LE(cell.report->t_avg, 1.0);
    EXPECT_TRUE(fs::exists(c.output_dir() / layout::kGrid /
                           ("cell_" + std::to_string(cell.source_private) + "_" +
                            std::to_string(cell.target_private)) /
                           layout::kEval / "report.json"));
  }
  EXPECT_FALSE(cells[0].report->t_unk.has_value());
  EXPECT_TRUE(cells[3].report->t_unk.has_value());
}

}  // namespace
}  // namespace sfda::harness
