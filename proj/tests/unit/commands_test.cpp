// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#include "sfda/harness/commands.hpp"

#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "sfda/checkpoint.hpp"
#include "sfda/harness/png_io.hpp"
#include "test_util.hpp"

namespace sfda::harness {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

ExperimentConfig tiny_config(const fs::path& root, const std::string& name = "run") {
  ExperimentConfig c = default_config();
  c.output_root = root.string();
  c.run_name = name;
  c.synthetic.task.images_per_class = 6;
  c.synthetic.task.image_size = 16;
  c.negatives.per_class = 2;
  c.model.backbone.kind = BackboneSpec::Kind::kConv;
  c.model.backbone.conv_channels = {4, 8};
  c.model.feature_hidden = {16};
  c.model.u_dim = 8;
  c.model.decoder_hidden = {16};
  c.procurement.max_iter = 20;
  c.procurement.update_iter = 10;
  c.procurement.pretrain_steps = 5;
  c.procurement.batch_size = 8;
  c.adaptation.iterations = 5;
  c.adaptation.batch_size = 8;
  c.sweep.betas = {0.1, 1.0};
  c.validate();
  return c;
}

std::vector<std::string> lines_of(const fs::path& path) {
  std::istringstream in(testing::slurp(path));
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string field; std::getline(in, field, ',');) out.push_back(field);
  return out;
}

int count_dirs(const fs::path& root) {
  int n = 0;
  for (const auto& e : fs::directory_iterator(root)) n += e.is_directory() ? 1 : 0;
  return n;
}

void run_ok(Command command, const ExperimentConfig& c) {
  std::ostringstream err;
  ASSERT_EQ(run_command(command, c, err), 0) << to_string(command) << ": " << err.str();
}

void run_through_procure(const ExperimentConfig& c) {
  run_ok(Command::kGenSynthetic, c);
  run_ok(Command::kSynthNegatives, c);
  run_ok(Command::kProcure, c);
}

void run_all(const ExperimentConfig& c) {
  run_through_procure(c);
  run_ok(Command::kAdapt, c);
  run_ok(Command::kEval, c);
}

json error_record(const ExperimentConfig& c) {
  return json::parse(testing::slurp(c.output_dir() / layout::kError));
}

TEST(CommandNamesTest, RoundTrip) {
  for (Command c : all_commands()) EXPECT_EQ(parse_command(to_string(c)), c);
  EXPECT_FALSE(parse_command("train").has_value());
  EXPECT_EQ(all_commands().size(), 7u);
}

TEST(SynthNegativesTest, SixClassesGiveFifteenDirectories) {
  testing::TempDir dir;
  const auto c = tiny_config(dir.path());
  run_ok(Command::kGenSynthetic, c);
  run_ok(Command::kSynthNegatives, c);
  const fs::path neg = c.output_dir() / layout::kNegatives;
  EXPECT_EQ(count_dirs(neg), 15);
  EXPECT_EQ(lines_of(c.output_dir() / layout::kNegativeManifest).size(), 1u + 15u * 2u);
  const auto labels =
      LabelManifest::from_text(testing::slurp(c.output_dir() / layout::kLabels));
  EXPECT_EQ(labels.table.num_negative(), 15);
  EXPECT_EQ(labels.source_class_names.size(), 6u);
}

TEST(SynthNegativesTest, RerunIsByteIdentical) {
  testing::TempDir dir;
  const auto c = tiny_config(dir.path());
  run_ok(Command::kGenSynthetic, c);
  run_ok(Command::kSynthNegatives, c);
  const auto manifest = testing::slurp(c.output_dir() / layout::kNegativeManifest);
  const auto labels = testing::slurp(c.output_dir() / layout::kLabels);
  const auto image = testing::slurp(c.output_dir() / layout::kNegatives / "0007/0001.png");
  run_ok(Command::kSynthNegatives, c);
  EXPECT_EQ(testing::slurp(c.output_dir() / layout::kNegativeManifest), manifest);
  EXPECT_EQ(testing::slurp(c.output_dir() / layout::kLabels), labels);
  EXPECT_EQ(testing::slurp(c.output_dir() / layout::kNegatives / "0007/0001.png"), image);
}

TEST(SynthNegativesTest, RequestedSubsetOfLargeLabelSpace) {
  testing::TempDir dir;
  auto c = tiny_config(dir.path());
  c.data.source_root = (dir.path() / "big").string();
  c.negatives.requested = 600;
  c.negatives.per_class = 1;
  Image img(3, 8, 8, 0.5);
  for (int k = 0; k < 1000; ++k) {
    char name[16];
    std::snprintf(name, sizeof(name), "c%04d", k);
    img.pixels[0] = k / 999.0;
    fs::create_directories(dir.path() / "big" / name);
    write_png(dir.path() / "big" / name / "0.png", img);
  }
  run_ok(Command::kSynthNegatives, c);
  EXPECT_EQ(count_dirs(c.output_dir() / layout::kNegatives), 600);
  const auto labels =
      LabelManifest::from_text(testing::slurp(c.output_dir() / layout::kLabels));
  EXPECT_EQ(labels.table.num_negative(), 600);
  EXPECT_EQ(labels.table.num_outputs(), 1600);
}

TEST(ProcureTest, TraceAndCheckpoint) {
  testing::TempDir dir;
  const auto c = tiny_config(dir.path());
  run_through_procure(c);
  const auto trace = lines_of(c.output_dir() / layout::kProcurementTrace);
  ASSERT_EQ(trace.size(), 1u + 20u);
  EXPECT_EQ(trace[0], "step,loss,value");
  EXPECT_EQ(split_csv(trace[1])[1], "L_CE");
  EXPECT_EQ(split_csv(trace[4])[1], "L_p");
  const auto bytes = testing::slurp(c.output_dir() / layout::kProcurementCheckpoint);
  const Checkpoint ck = deserialize_checkpoint(bytes);
  EXPECT_EQ(serialize_checkpoint(ck), bytes);
  EXPECT_EQ(ck.model.num_positive, 6);
  EXPECT_EQ(ck.priors.size(), 6u);
  EXPECT_FALSE(ck.target_extractor.has_value());
  EXPECT_TRUE(fs::exists(c.output_dir() / layout::kProcureLog));
}

TEST(ProcureTest, MissingNegativesIsDataError) {
  testing::TempDir dir;
  const auto c = tiny_config(dir.path());
  run_ok(Command::kGenSynthetic, c);
  std::ostringstream err;
  EXPECT_EQ(run_command(Command::kProcure, c, err), 3);
  EXPECT_NE(err.str().find("synth-negatives"), std::string::npos);
}

TEST(ProcureTest, PriorSampledNeedsNoNegativeDataset) {
  testing::TempDir dir;
  auto c = tiny_config(dir.path());
  c.procurement.negative_mode = NegativeMode::kPriorSampled;
  run_ok(Command::kGenSynthetic, c);
  run_ok(Command::kProcure, c);
  run_ok(Command::kAdapt, c);
  run_ok(Command::kEval, c);
  EXPECT_FALSE(fs::exists(c.output_dir() / layout::kNegatives));
  const auto ck = load_checkpoint(c.output_dir() / layout::kProcurementCheckpoint);
  EXPECT_EQ(ck.model.num_negative, 1);
}

TEST(ProcureTest, InvalidConfigurationExitsTwo) {
  testing::TempDir dir;
  auto c = tiny_config(dir.path());
  run_ok(Command::kGenSynthetic, c);
  run_ok(Command::kSynthNegatives, c);
  c.procurement.alpha = -1.0;
  std::ostringstream err;
  EXPECT_EQ(run_command(Command::kProcure, c, err), 2);
  const json rec = error_record(c);
  EXPECT_EQ(rec["command"], "procure");
  EXPECT_EQ(rec["exit_code"], 2);
}

TEST(ProcureTest, DivergenceExitsFourWithStep) {
  testing::TempDir dir;
  auto c = tiny_config(dir.path());
  run_ok(Command::kGenSynthetic, c);
  run_ok(Command::kSynthNegatives, c);
  c.procurement.learning_rate = 1e300;
  c.procurement.pretrain_steps = 0;
  std::ostringstream err;
  EXPECT_EQ(run_command(Command::kProcure, c, err), 4) << err.str();
  const json rec = error_record(c);
  EXPECT_EQ(rec["exit_code"], 4);
  EXPECT_TRUE(rec.contains("step"));
}

TEST(AdaptTest, LogRecordsFrozenCheckAndAccess) {
  testing::TempDir dir;
  const auto c = tiny_config(dir.path());
  run_through_procure(c);
  run_ok(Command::kAdapt, c);
  const std::string log = testing::slurp(c.output_dir() / layout::kAdaptLog);
  EXPECT_NE(log.find("frozen: OK"), std::string::npos);
  EXPECT_NE(log.find("access: source_images=0 target_labels=0"), std::string::npos);
  EXPECT_EQ(lines_of(c.output_dir() / layout::kAdaptationTrace).size(), 1u + 5u);

  const auto before = load_checkpoint(c.output_dir() / layout::kProcurementCheckpoint);
  const auto after = load_checkpoint(c.output_dir() / layout::kAdaptedCheckpoint);
  EXPECT_EQ(checksum(after.model.all_parameters()), checksum(before.model.all_parameters()));
  ASSERT_TRUE(after.target_extractor.has_value());
  EXPECT_NE(checksum(after.target_extractor->parameters("F")),
            checksum(before.model.feature_extractor.parameters("F")));
}

TEST(AdaptTest, ZeroIterationsKeepsTargetExtractorEqualToSource) {
  testing::TempDir dir;
  auto c = tiny_config(dir.path());
  c.adaptation.iterations = 0;
  run_through_procure(c);
  run_ok(Command::kAdapt, c);
  const auto ck = load_checkpoint(c.output_dir() / layout::kAdaptedCheckpoint);
  ASSERT_TRUE(ck.target_extractor.has_value());
  EXPECT_EQ(checksum(ck.target_extractor->parameters("F")),
            checksum(ck.model.feature_extractor.parameters("F")));
}

TEST(AdaptTest, BetaOverrideChangesTrace) {
  testing::TempDir dir;
  const auto c = tiny_config(dir.path());
  run_through_procure(c);
  run_ok(Command::kAdapt, c);
  const auto base = lines_of(c.output_dir() / layout::kAdaptationTrace);
  const auto changed = apply_overrides(c, {"adaptation.beta=1.0"});
  run_ok(Command::kAdapt, changed);
  const auto other = lines_of(c.output_dir() / layout::kAdaptationTrace);
  ASSERT_EQ(base.size(), other.size());
  EXPECT_NE(split_csv(base[1])[3], split_csv(other[1])[3]);
  EXPECT_EQ(split_csv(base[1])[1], split_csv(other[1])[1]);
}

TEST(AdaptTest, MissingCheckpointIsDataError) {
  testing::TempDir dir;
  const auto c = tiny_config(dir.path());
  run_ok(Command::kGenSynthetic, c);
  std::ostringstream err;
  EXPECT_EQ(run_command(Command::kAdapt, c, err), 3);
  EXPECT_EQ(error_record(c)["command"], "adapt");
}

TEST(EvalTest, ReportRowsAndUnknownRecount) {
  testing::TempDir dir;
  const auto c = tiny_config(dir.path());
  run_all(c);
  const fs::path eval = c.output_dir() / layout::kEval;
  for (const char* f : {"report.txt", "report.csv", "report.json", "confusion.csv",
                        "predictions.csv", "ssm_histogram.csv", "ssm_histogram.png"}) {
    EXPECT_TRUE(fs::exists(eval / f)) << f;
  }
  // Shared classes 2..5 plus the unknown row.
  EXPECT_EQ(lines_of(eval / "report.csv").size(), 1u + 4u + 1u);
  EXPECT_EQ(lines_of(eval / "confusion.csv").size(), 1u + 4u + 1u);

  const auto preds = lines_of(eval / "predictions.csv");
  ASSERT_EQ(preds.size(), 1u + 7u * 6u);
  long private_count = 0, unknown_hits = 0;
  for (std::size_t i = 1; i < preds.size(); ++i) {
    const auto f = split_csv(preds[i]);
    if (f[1] == "class_06" || f[1] == "class_07" || f[1] == "class_08") {
      ++private_count;
      unknown_hits += f[2] == "unknown" ? 1 : 0;
    }
  }
  const json report = json::parse(testing::slurp(eval / "report.json"));
  EXPECT_EQ(private_count, 18);
  EXPECT_DOUBLE_EQ(report["t_unk"].get<double>(),
                   static_cast<double>(unknown_hits) / private_count);
}

TEST(EvalTest, ClosedSetHasNoUnknownRow) {
  testing::TempDir dir;
  auto c = tiny_config(dir.path());
  c.synthetic.target_classes = {2, 3, 4};
  run_all(c);
  const fs::path eval = c.output_dir() / layout::kEval;
  EXPECT_EQ(lines_of(eval / "report.csv").size(), 1u + 3u);
  EXPECT_TRUE(json::parse(testing::slurp(eval / "report.json"))["t_unk"].is_null());
  EXPECT_EQ(testing::slurp(eval / "report.csv").find("unknown"), std::string::npos);
}

TEST(EvalTest, UndeclaredTargetLabelNamesTheFile) {
  testing::TempDir dir;
  auto c = tiny_config(dir.path());
  run_through_procure(c);
  run_ok(Command::kAdapt, c);
  c.data.target_classes = {"class_02", "class_03", "class_04", "class_05", "class_06",
                           "class_07"};
  std::ostringstream err;
  EXPECT_EQ(run_command(Command::kEval, c, err), 3);
  const json rec = error_record(c);
  EXPECT_EQ(rec["command"], "eval");
  EXPECT_NE(rec["message"].get<std::string>().find("class_08/0000.png"), std::string::npos)
      << rec.dump();
}

TEST(EvalTest, SuccessRemovesStaleErrorRecord) {
  testing::TempDir dir;
  const auto c = tiny_config(dir.path());
  run_ok(Command::kGenSynthetic, c);
  std::ostringstream err;
  EXPECT_NE(run_command(Command::kEval, c, err), 0);
  EXPECT_TRUE(fs::exists(c.output_dir() / layout::kError));
  run_ok(Command::kGenSynthetic, c);
  EXPECT_FALSE(fs::exists(c.output_dir() / layout::kError));
}

TEST(PipelineTest, FixedSeedIsDeterministic) {
  testing::TempDir dir;
  const auto a = tiny_config(dir.path(), "a");
  const auto b = tiny_config(dir.path(), "b");
  run_all(a);
  run_all(b);
  for (const char* f : {layout::kProcurementCheckpoint, layout::kAdaptedCheckpoint,
                        layout::kProcurementTrace, layout::kAdaptationTrace, "eval/report.json",
                        "eval/predictions.csv"}) {
    EXPECT_EQ(testing::slurp(a.output_dir() / f), testing::slurp(b.output_dir() / f)) << f;
  }
}

TEST(SweepTest, OneReportPerBeta) {
  testing::TempDir dir;
  const auto c = tiny_config(dir.path());
  run_through_procure(c);
  const auto points = cmd_sweep_beta(c);
  ASSERT_EQ(points.size(), 2u);
  EXPECT_EQ(points[0].beta, 0.1);
  const auto csv = lines_of(c.output_dir() / layout::kSweep / "beta_sweep.csv");
  ASSERT_EQ(csv.size(), 3u);
  EXPECT_EQ(split_csv(csv[2])[0], "1");
  EXPECT_TRUE(fs::exists(c.output_dir() / layout::kSweep / "beta_0.1/eval/report.json"));
}

TEST(SweepTest, RequiresProcurementCheckpoint) {
  testing::TempDir dir;
  const auto c = tiny_config(dir.path());
  std::ostringstream err;
  EXPECT_EQ(run_command(Command::kSweepBeta, c, err), 3);
}

ExperimentConfig grid_config(const fs::path& root) {
  auto c = tiny_config(root);
  c.synthetic.task.num_classes = 6;
  c.synthetic.task.num_parts = 4;
  c.grid.universe = 6;
  c.grid.source_private = {0, 2};
  c.grid.target_private = {0, 2};
  return c;
}

TEST(GridTest, RowMajorCellsAndOutputs) {
  testing::TempDir dir;
  auto c = grid_config(dir.path());
  c.grid.source_private = {0, 5};
  c.grid.target_private = {0, 2, 3};
  const auto cells = cmd_grid(c);
  ASSERT_EQ(cells.size(), 6u);
  EXPECT_EQ(cells[1].source_private, 0);
  EXPECT_EQ(cells[1].target_private, 2);
  EXPECT_TRUE(cells[2].feasible);
  EXPECT_TRUE(cells[3].feasible);
  EXPECT_FALSE(cells[4].feasible);  // negative shared count
  const fs::path grid = c.output_dir() / layout::kGrid;
  const auto rows = lines_of(grid / "grid.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(split_csv(rows[0]).size(), 4u);
  EXPECT_NE(rows[2].find("infeasible"), std::string::npos);
  EXPECT_EQ(lines_of(grid / "grid_cells.csv").size(), 7u);
  EXPECT_TRUE(fs::exists(grid / "heatmap.png"));
}

TEST(GridTest, ResumeRecomputesOnlyUnfinishedCells) {
  testing::TempDir dir;
  const auto c = grid_config(dir.path());
  struct Interrupt {};
  EXPECT_THROW(cmd_grid(c,
                        [](const GridProgress& p) {
                          if (p.index == 2) throw Interrupt{};
                        }),
               Interrupt);
  const fs::path grid = c.output_dir() / layout::kGrid;
  EXPECT_TRUE(fs::exists(grid / "cell_2_0/eval/report.json"));
  EXPECT_FALSE(fs::exists(grid / "cell_2_2"));

  std::vector<GridProgress> seen;
  const auto cells = cmd_grid(c, [&](const GridProgress& p) { seen.push_back(p); });
  ASSERT_EQ(seen.size(), 4u);
  EXPECT_TRUE(seen[0].resumed);
  EXPECT_TRUE(seen[1].resumed);
  EXPECT_TRUE(seen[2].resumed);
  EXPECT_FALSE(seen[3].resumed);
  EXPECT_EQ(seen[3].source_private, 2);
  EXPECT_EQ(seen[3].target_private, 2);

  // A resumed report is the one written by the interrupted run.
  const auto again = cmd_grid(c);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(again[i].report->t_avg, cells[i].report->t_avg);
    EXPECT_EQ(again[i].report->t_unk, cells[i].report->t_unk);
  }
}

TEST(ReportJsonTest, RoundTrip) {
  MetricReport r;
  r.t_avg = 0.625;
  r.t_unk = 0.5;
  r.per_class[kUnknown] = {4, 2, 0.5};
  r.per_class[1] = {4, 3, 0.75};
  const MetricReport back = report_from_json(report_to_json(r, {"a", "b"}));
  EXPECT_EQ(back.t_avg, r.t_avg);
  EXPECT_EQ(back.t_unk, r.t_unk);
  ASSERT_EQ(back.per_class.size(), 2u);
  EXPECT_EQ(back.per_class.at(1).correct, 3);
  EXPECT_THROW(report_from_json("{"), Error);
}

}  // namespace
}  // namespace sfda::harness
