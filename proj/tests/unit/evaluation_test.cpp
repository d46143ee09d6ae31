// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#include "sfda/evaluation.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "metric_oracle.hpp"
#include "sfda/error.hpp"

namespace sfda {
namespace {

std::vector<PredictionRecord> records_for(const std::vector<std::pair<ClassId, ClassId>>& truth_pred) {
  std::vector<PredictionRecord> out;
  for (std::size_t i = 0; i < truth_pred.size(); ++i) {
    out.push_back({"s" + std::to_string(i), truth_pred[i].second, truth_pred[i].first, std::nullopt});
  }
  return out;
}

TEST(PredictTest, NegativeArgmaxIsUnknown) {
  const std::vector<double> logits = {0.1, 0.2, 0.0, 0.3, 0.4, 5.0};
  EXPECT_EQ(predict_with_unknown(logits, 3), kUnknown);
}

TEST(PredictTest, PositiveArgmaxIsClass) {
  std::vector<double> logits(8, 0.0);
  logits[3] = 1.0;
  EXPECT_EQ(predict_with_unknown(logits, 5), 3);
}

TEST(PredictTest, TiesGoToLowestIndex) {
  EXPECT_EQ(predict_with_unknown(std::vector<double>(6, 0.7), 2), 0);
  const std::vector<double> tie = {0.0, 1.0, 0.0, 1.0};
  EXPECT_EQ(predict_with_unknown(tie, 2), 1);
  const std::vector<double> neg_tie = {0.0, 0.0, 1.0, 1.0};
  EXPECT_EQ(predict_with_unknown(neg_tie, 2), kUnknown);
}

TEST(PredictTest, ShiftInvariant) {
  Rng rng(3);
  const Matrix logits = testing::random_matrix(200, 7, rng, 3.0);
  const Matrix shifted = (logits.array() - 42.0).matrix();
  EXPECT_EQ(predict_with_unknown(logits, 4), predict_with_unknown(shifted, 4));
}

TEST(EvaluateTest, ToyConfusionTable) {
  // Class 0: 1/1 correct, class 1: 1/2, unknown: 3/4.
  const auto ls = LabelSpace::make({0, 1, 2}, {0, 1, 3});
  const auto recs = records_for({{0, 0}, {1, 1}, {1, 0}, {3, kUnknown}, {3, kUnknown},
                                 {3, kUnknown}, {3, 2}});
  const auto r = evaluate(recs, ls);
  ASSERT_EQ(r.per_class.size(), 3u);
  EXPECT_DOUBLE_EQ(r.per_class.at(0).accuracy, 1.0);
  EXPECT_DOUBLE_EQ(r.per_class.at(1).accuracy, 0.5);
  EXPECT_DOUBLE_EQ(r.per_class.at(kUnknown).accuracy, 0.75);
  EXPECT_DOUBLE_EQ(r.t_avg, 0.75);
  EXPECT_DOUBLE_EQ(*r.t_unk, 0.75);
}

TEST(EvaluateTest, UnknownRecall) {
  const auto ls = LabelSpace::make({0, 1}, {0, 1, 2, 3});
  std::vector<std::pair<ClassId, ClassId>> tp;
  for (int i = 0; i < 10; ++i) tp.push_back({2 + i % 2, i < 8 ? kUnknown : 0});
  const auto r = evaluate(records_for(tp), ls);
  EXPECT_DOUBLE_EQ(*r.t_unk, 0.8);
  EXPECT_EQ(*r.t_unk, r.per_class.at(kUnknown).accuracy);
}

TEST(EvaluateTest, AllCorrect) {
  const auto ls = LabelSpace::make({0, 1, 2}, {1, 2, 5});
  const auto r = evaluate(records_for({{1, 1}, {2, 2}, {5, kUnknown}, {2, 2}}), ls);
  EXPECT_EQ(r.t_avg, 1.0);
  EXPECT_EQ(*r.t_unk, 1.0);
}

TEST(EvaluateTest, ClosedSetHasNoUnknownRow) {
  const auto ls = LabelSpace::make({0, 1}, {0, 1});
  const auto r = evaluate(records_for({{0, 0}, {1, kUnknown}}), ls);
  EXPECT_FALSE(r.t_unk.has_value());
  EXPECT_FALSE(r.per_class.count(kUnknown));
  EXPECT_DOUBLE_EQ(r.t_avg, 0.5);
}

TEST(EvaluateTest, ClassWithoutSamplesExcluded) {
  // Partial setting: class 2 is source-private and has no target samples.
  const auto ls = LabelSpace::make({0, 1, 2}, {0, 1});
  const auto r = evaluate(records_for({{0, 0}, {1, 2}}), ls);
  EXPECT_EQ(r.per_class.size(), 2u);
  EXPECT_DOUBLE_EQ(r.t_avg, 0.5);
}

TEST(EvaluateTest, LabelOutsideTargetSetIsDataError) {
  const auto ls = LabelSpace::make({0, 1}, {0, 1});
  try {
    evaluate(records_for({{0, 0}, {7, 1}}), ls);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kData);
    EXPECT_NE(std::string(e.what()).find("s1"), std::string::npos);
  }
}

TEST(EvaluateTest, MatchesBruteForceOracle) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto set = testing::random_prediction_set(seed);
    const auto report = evaluate(set.records, set.label_space);
    EXPECT_TRUE(testing::matches_oracle(report, testing::brute_force_scores(set))) << seed;
    for (const auto& [cls, s] : report.per_class) {
      EXPECT_GE(s.accuracy, 0.0);
      EXPECT_LE(s.accuracy, 1.0);
    }
  }
}

TEST(EvaluateTest, TunkMatchesDirectCount) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto set = testing::random_prediction_set(seed);
    long n = 0, hit = 0;
    for (const auto& r : set.records) {
      if (r.true_label >= static_cast<ClassId>(set.label_space.source_labels().size())) {
        ++n;
        hit += r.predicted == kUnknown;
      }
    }
    const auto report = evaluate(set.records, set.label_space);
    if (n == 0) {
      EXPECT_FALSE(report.t_unk.has_value());
    } else {
      EXPECT_EQ(*report.t_unk, static_cast<double>(hit) / static_cast<double>(n));
    }
  }
}

TEST(EvaluateTest, TavgInvariantToDuplicatingAClass) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto set = testing::random_prediction_set(seed);
    const auto base = evaluate(set.records, set.label_space);
    // Private classes are scored as one pooled unknown class, so the
    // duplicated group is the whole pool when the victim is private.
    const auto& ls = set.label_space;
    const ClassId victim = set.records.front().true_label;
    std::vector<PredictionRecord> extra;
    for (const auto& r : set.records) {
      const bool same_group = ls.is_target_private(victim) ? ls.is_target_private(r.true_label)
                                                           : r.true_label == victim;
      if (same_group) extra.push_back(r);
    }
    set.records.insert(set.records.end(), extra.begin(), extra.end());
    EXPECT_NEAR(evaluate(set.records, set.label_space).t_avg, base.t_avg, 1e-15);
  }
}

TEST(HistogramTest, IdenticalPopulationsIdenticalCounts) {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(1.0, std::numbers::e);
  std::vector<double> v(300);
  for (double& x : v) x = u(rng);
  const auto h = ssm_histogram({{"a", v}, {"b", v}});
  EXPECT_EQ(h.counts.at("a"), h.counts.at("b"));
  EXPECT_EQ(h.means.at("a"), h.means.at("b"));
  long total = 0;
  for (long c : h.counts.at("a")) total += c;
  EXPECT_EQ(total, 300);
  EXPECT_EQ(h.counts.at("a").size(), static_cast<std::size_t>(SsmHistogram::kDefaultBins));
}

TEST(HistogramTest, ExtremesFullySeparated) {
  const auto h = ssm_histogram({{"low", std::vector<double>(10, 1.0)},
                                {"high", std::vector<double>(10, std::numbers::e)}},
                               10);
  EXPECT_EQ(h.counts.at("low").front(), 10);
  EXPECT_EQ(h.counts.at("high").back(), 10);
  EXPECT_NEAR(h.means.at("high") - h.means.at("low"), std::numbers::e - 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(h.lo, 1.0);
  EXPECT_DOUBLE_EQ(h.hi, std::numbers::e);
}

TEST(OneShotTest, NearestCenter) {
  Matrix centers(2, 2);
  centers << 0, 0, 10, 10;
  const std::vector<ClassId> labels = {4, 9};
  Matrix probe(1, 2);
  probe << 1, 1;
  EXPECT_EQ(one_shot_recognition(centers, labels, probe, std::vector<ClassId>{4}), 1.0);
  EXPECT_EQ(one_shot_recognition(centers, labels, centers.row(1), std::vector<ClassId>{9}), 1.0);
  EXPECT_EQ(one_shot_recognition(centers, labels, probe, std::vector<ClassId>{9}), 0.0);
}

TEST(OneShotTest, SeparableClustersPerfect) {
  Rng rng(4);
  const int k = 5, per = 40;
  const Matrix centers = testing::random_matrix(k, 6, rng, 20.0);
  std::vector<ClassId> center_labels, probe_labels;
  Matrix probes(k * per, 6);
  for (int c = 0; c < k; ++c) {
    center_labels.push_back(c + 10);
    for (int i = 0; i < per; ++i) {
      probes.row(c * per + i) = centers.row(c) + testing::random_matrix(1, 6, rng, 0.1);
      probe_labels.push_back(c + 10);
    }
  }
  EXPECT_EQ(one_shot_recognition(centers, center_labels, probes, probe_labels), 1.0);
}

TEST(OneShotTest, DuplicateClassIsConfigurationError) {
  const Matrix centers = Matrix::Zero(2, 2);
  try {
    one_shot_recognition(centers, std::vector<ClassId>{1, 1}, centers, std::vector<ClassId>{1, 1});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidConfiguration);
  }
}

TEST(OneShotTest, EmbedsThroughAdaptedModel) {
  const testing::TinyProblem t = testing::make_tiny_problem(2);
  const DeploymentModel m(t.model, t.priors);
  const Matrix inputs = t.batch.v_pos;
  const std::vector<ClassId> labels = {0, 1, 2};
  EXPECT_EQ(one_shot_recognition(m, inputs, labels, inputs, labels), 1.0);
}

TEST(GridTest, LabelSpacePerCell) {
  const auto closed = grid_label_space(10, 0, 0);
  ASSERT_TRUE(closed.has_value());
  EXPECT_TRUE(closed->is_closed_set());
  const auto cell = grid_label_space(10, 2, 3);
  ASSERT_TRUE(cell.has_value());
  EXPECT_EQ(cell->source_private().size(), 2u);
  EXPECT_EQ(cell->target_private().size(), 3u);
  EXPECT_EQ(cell->shared().size(), 5u);
  EXPECT_FALSE(grid_label_space(10, 6, 6).has_value());
  EXPECT_FALSE(grid_label_space(10, 0, 9).has_value());
}

TEST(GridTest, RunsFeasibleCellsRowMajor) {
  GridSpec spec{10, {0, 4, 8}, {0, 4}};
  std::vector<std::size_t> visited;
  const auto cells = category_gap_grid(spec, [&](const LabelSpace& ls, std::size_t i) {
    visited.push_back(i);
    MetricReport r;
    r.t_avg = static_cast<double>(ls.target_private().size()) / 10.0;
    return r;
  });
  ASSERT_EQ(cells.size(), 6u);
  EXPECT_EQ(visited, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  EXPECT_FALSE(cells[5].feasible);
  EXPECT_FALSE(cells[5].report.has_value());
  EXPECT_EQ(cells[3].source_private, 4);
  EXPECT_EQ(cells[3].target_private, 4);
  EXPECT_DOUBLE_EQ(cells[3].report->t_avg, 0.4);
}

}  // namespace
}  // namespace sfda
