// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#include "sfda/harness/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sfda/checkpoint.hpp"
#include "sfda/compositor.hpp"
#include "sfda/error.hpp"
#include "sfda/harness/corpus.hpp"
#include "sfda/harness/plot.hpp"
#include "sfda/harness/png_io.hpp"
#include "sfda/rng.hpp"

namespace sfda::harness {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Stream tags for derive_seed(config.seed, {tag}).
enum SeedTag : std::uint64_t {
  kSeedSynthetic = 1,
  kSeedNegativeTable = 2,
  kSeedNegativeImages = 3,
  kSeedModel = 4,
  kSeedProcurement = 5,
  kSeedAdaptation = 6,
};

std::uint64_t stage_seed(const ExperimentConfig& c, SeedTag tag) {
  return derive_seed(c.seed, {tag});
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kData, "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) fail(ErrorKind::kData, "cannot write " + path.string());
}

std::string fmt(const char* format, double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, value);
  return buf;
}

std::string padded(long value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04ld", value);
  return buf;
}

// One line per step: step, loss name, value, wall time.
class StepLog {
 public:
  explicit StepLog(const fs::path& path)
      : out_(path), start_(std::chrono::steady_clock::now()) {
    if (!out_) fail(ErrorKind::kData, "cannot write " + path.string());
  }

  void line(const std::string& text) { out_ << text << '\n'; }

  void step(long step, std::string_view loss, double value) {
    out_ << "step=" << step << " loss=" << loss << " value=" << fmt("%.6g", value)
         << " wall=" << fmt("%.3f", elapsed()) << "s\n";
  }

  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::ofstream out_;
  std::chrono::steady_clock::time_point start_;
};

std::vector<std::string> sorted_class_dirs(const fs::path& root) {
  if (!fs::is_directory(root)) {
    fail(ErrorKind::kData, "corpus directory " + root.string() + " does not exist");
  }
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) names.push_back(e.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  if (names.empty()) fail(ErrorKind::kData, "corpus " + root.string() + " has no classes");
  return names;
}

BackboneSpec backbone_for(const ExperimentConfig& c, const Image& sample) {
  BackboneSpec spec = c.model.backbone;
  spec.channels = sample.channels;
  spec.height = sample.height;
  spec.width = sample.width;
  return spec;
}

Checkpoint load_stage_checkpoint(const fs::path& path, const char* producer) {
  if (!fs::exists(path)) {
    fail(ErrorKind::kData,
         "checkpoint " + path.string() + " not found (run " + producer + " first)");
  }
  return load_checkpoint(path);
}

void check_input_shape(const Matrix& inputs, const ProcurementModel& model,
                       const fs::path& root) {
  if (inputs.cols() != model.backbone.input_dim()) {
    fail(ErrorKind::kData, "images under " + root.string() +
                               " do not match the checkpoint's input shape");
  }
}

std::string class_label(ClassId id, const std::vector<std::string>& names) {
  if (id == kUnknown) return "unknown";
  if (id >= 0 && static_cast<std::size_t>(id) < names.size()) return names[id];
  return std::to_string(id);
}

// Target class names mapped onto output ids: source classes keep their
// position, target-private classes are numbered after |Cs|.
struct TargetClasses {
  std::vector<std::string> names;
  std::vector<ClassId> ids;
  std::vector<std::string> id_names;  // id -> name for every id in use
};

TargetClasses resolve_target_classes(const ExperimentConfig& c,
                                     const std::vector<std::string>& source_names) {
  TargetClasses t;
  t.names = c.data.target_classes.empty() ? sorted_class_dirs(c.target_root())
                                          : c.data.target_classes;
  t.id_names = source_names;
  for (const auto& name : t.names) {
    const auto it = std::find(source_names.begin(), source_names.end(), name);
    if (it != source_names.end()) {
      t.ids.push_back(static_cast<ClassId>(it - source_names.begin()));
    } else {
      t.ids.push_back(static_cast<ClassId>(t.id_names.size()));
      t.id_names.push_back(name);
    }
  }
  return t;
}

void write_eval_outputs(const fs::path& dir, const MetricReport& report,
                        const std::vector<PredictionRecord>& records,
                        const LabelSpace& label_space, const TargetClasses& target,
                        int num_source, const SsmHistogram& histogram) {
  fs::create_directories(dir);
  const auto& names = target.id_names;

  std::ostringstream txt;
  txt << "T_avg " << fmt("%.6f", report.t_avg) << "\n";
  txt << "T_unk " << (report.t_unk ? fmt("%.6f", *report.t_unk) : std::string("n/a")) << "\n";
  for (const auto& [id, s] : report.per_class) {
    txt << class_label(id, names) << " count=" << s.count << " correct=" << s.correct
        << " accuracy=" << fmt("%.6f", s.accuracy) << "\n";
  }
  for (const auto& [pop, mean] : histogram.means) {
    txt << "mean_w[" << pop << "] " << fmt("%.6f", mean) << "\n";
  }
  write_file(dir / "report.txt", txt.str());

  std::ostringstream csv;
  csv << "class,count,correct,accuracy\n";
  for (const auto& [id, s] : report.per_class) {
    csv << class_label(id, names) << "," << s.count << "," << s.correct << ","
        << fmt("%.6f", s.accuracy) << "\n";
  }
  write_file(dir / "report.csv", csv.str());
  write_file(dir / "report.json", report_to_json(report, names));

  // Rows: evaluable truth (shared classes, then unknown). Columns: every
  // source class, then unknown.
  std::vector<ClassId> rows;
  for (ClassId id : label_space.shared()) {
    if (report.per_class.count(id)) rows.push_back(id);
  }
  if (report.per_class.count(kUnknown)) rows.push_back(kUnknown);
  std::map<std::pair<ClassId, ClassId>, long> confusion;
  for (const auto& r : records) {
    const ClassId truth = label_space.is_target_private(r.true_label) ? kUnknown : r.true_label;
    ++confusion[{truth, r.predicted}];
  }
  std::ostringstream conf;
  conf << "true\\predicted";
  for (int k = 0; k < num_source; ++k) conf << "," << names[k];
  conf << ",unknown\n";
  for (ClassId truth : rows) {
    conf << class_label(truth, names);
    for (int k = 0; k <= num_source; ++k) {
      const ClassId pred = k < num_source ? k : kUnknown;
      const auto it = confusion.find({truth, pred});
      conf << "," << (it == confusion.end() ? 0 : it->second);
    }
    conf << "\n";
  }
  write_file(dir / "confusion.csv", conf.str());

  std::ostringstream pred;
  pred << "sample_id,true_class,predicted,w,w_prime\n";
  for (const auto& r : records) {
    pred << r.sample_id << "," << class_label(r.true_label, names) << ","
         << class_label(r.predicted, names) << "," << fmt("%.6f", r.ssm->w) << ","
         << fmt("%.6f", r.ssm->w_prime) << "\n";
  }
  write_file(dir / "predictions.csv", pred.str());

  std::ostringstream hist;
  hist << "population,bin_lo,bin_hi,count\n";
  const int bins = static_cast<int>(histogram.counts.begin()->second.size());
  const double width = (histogram.hi - histogram.lo) / bins;
  for (const auto& [pop, counts] : histogram.counts) {
    for (int b = 0; b < bins; ++b) {
      hist << pop << "," << fmt("%.6f", histogram.lo + b * width) << ","
           << fmt("%.6f", histogram.lo + (b + 1) * width) << "," << counts[b] << "\n";
    }
  }
  write_file(dir / "ssm_histogram.csv", hist.str());
  write_histogram_png(dir / "ssm_histogram.png", histogram);
}

// Subset corpus made of symlinks into a universe corpus.
void link_subset(const fs::path& universe, const fs::path& dest,
                 const std::vector<std::string>& names) {
  fs::remove_all(dest);
  fs::create_directories(dest);
  for (const auto& name : names) {
    fs::create_directory_symlink(fs::absolute(universe / name), dest / name);
  }
}

}  // namespace

std::string_view to_string(Command command) {
  switch (command) {
    case Command::kGenSynthetic: return "gen-synthetic";
    case Command::kSynthNegatives: return "synth-negatives";
    case Command::kProcure: return "procure";
    case Command::kAdapt: return "adapt";
    case Command::kEval: return "eval";
    case Command::kGrid: return "grid";
    case Command::kSweepBeta: return "sweep-beta";
  }
  return "unknown";
}

const std::vector<Command>& all_commands() {
  static const std::vector<Command> commands = {
      Command::kGenSynthetic, Command::kSynthNegatives, Command::kProcure,
      Command::kAdapt,        Command::kEval,           Command::kGrid,
      Command::kSweepBeta};
  return commands;
}

std::optional<Command> parse_command(std::string_view name) {
  for (Command c : all_commands()) {
    if (to_string(c) == name) return c;
  }
  return std::nullopt;
}

std::vector<std::string> source_class_names(const ExperimentConfig& config) {
  return config.data.source_classes.empty() ? sorted_class_dirs(config.source_root())
                                            : config.data.source_classes;
}

void cmd_gen_synthetic(const ExperimentConfig& config) {
  generate_synthetic_task(config.synthetic.task, config.synthetic.source_classes,
                          config.synthetic.target_classes, config.source_root(),
                          config.target_root(), stage_seed(config, kSeedSynthetic));
}

void cmd_synth_negatives(const ExperimentConfig& config) {
  const auto names = source_class_names(config);
  const auto corpus = load_labeled_corpus(config.source_root(), names, DataDomain::kSource);
  std::vector<Sample> samples;
  samples.reserve(corpus.size());
  for (const auto& img : corpus) samples.push_back({img.id, img.image, img.label});
  const auto population =
      SamplePopulation::make(PopulationRole::kSourceShared, std::move(samples));

  const int cs = static_cast<int>(names.size());
  const std::int64_t requested = config.negatives.requested < 0
                                     ? NegativeClassTable::max_pairs(cs)
                                     : config.negatives.requested;
  const std::uint64_t table_seed = stage_seed(config, kSeedNegativeTable);
  const auto table = NegativeClassTable::build(cs, requested, table_seed);
  const auto composites = build_negative_dataset(population, table, config.negatives.per_class,
                                                 stage_seed(config, kSeedNegativeImages));

  const fs::path out = config.output_dir();
  const fs::path root = out / layout::kNegatives;
  fs::remove_all(root);
  std::ostringstream manifest;
  manifest << "file,output_index,class_a,class_b,parent_a,parent_b,mask_seed\n";
  std::map<int, long> counter;
  for (const auto& c : composites) {
    const std::string rank = padded(c.negative_label - cs);
    const std::string file = rank + "/" + padded(counter[c.negative_label]++) + ".png";
    fs::create_directories(root / rank);
    write_png(root / file, c.image);
    manifest << file << "," << c.negative_label << "," << names[c.parent_classes.first] << ","
             << names[c.parent_classes.second] << "," << c.parent_ids.first << ","
             << c.parent_ids.second << "," << c.mask_seed << "\n";
  }
  write_file(out / layout::kNegativeManifest, manifest.str());

  LabelManifest labels{names, {}, table, table_seed};
  write_file(out / layout::kLabels, labels.to_text());
}

void cmd_procure(const ExperimentConfig& config) {
  const fs::path out = config.output_dir();
  fs::create_directories(out);
  const auto names = source_class_names(config);
  const int cs = static_cast<int>(names.size());
  const auto corpus = load_labeled_corpus(config.source_root(), names, DataDomain::kSource);
  if (corpus.empty()) fail(ErrorKind::kData, "source corpus has no images");
  LabeledInputs positives{to_matrix(corpus), {}};
  for (const auto& img : corpus) positives.labels.push_back(img.label);

  const bool prior_sampled =
      config.procurement.negative_mode == NegativeMode::kPriorSampled;
  LabelManifest labels;
  LabeledInputs negatives{Matrix(0, positives.inputs.cols()), {}};
  int num_negative = 1;
  if (prior_sampled) {
    labels = {names, {}, NegativeClassTable::from_pairs(cs, {}), 0};
  } else {
    const fs::path labels_path = out / layout::kLabels;
    if (!fs::exists(labels_path)) {
      fail(ErrorKind::kData, labels_path.string() + " not found (run synth-negatives first)");
    }
    labels = LabelManifest::from_text(read_file(labels_path));
    if (labels.source_class_names != names) {
      fail(ErrorKind::kData, "negative dataset was built for different source classes");
    }
    num_negative = labels.table.num_negative();
    std::vector<std::string> dirs;
    std::vector<ClassId> ids;
    for (int r = 0; r < num_negative; ++r) {
      dirs.push_back(padded(r));
      ids.push_back(cs + r);
    }
    const auto neg = load_labeled_corpus(out / layout::kNegatives, dirs, ids,
                                         DataDomain::kNegative);
    if (!neg.empty()) negatives.inputs = to_matrix(neg);
    for (const auto& img : neg) negatives.labels.push_back(img.label);
  }

  ModelSpec spec = config.model;
  spec.backbone = backbone_for(config, corpus.front().image);
  ProcurementConfig pc = config.procurement;
  pc.seed = stage_seed(config, kSeedProcurement);
  auto model = ProcurementModel::create(spec, cs, num_negative, stage_seed(config, kSeedModel));

  StepLog log(out / layout::kProcureLog);
  log.line("# procure seed=" + std::to_string(config.seed) + " classes=" +
           std::to_string(cs) + " negatives=" + std::to_string(num_negative));
  ProcurementResult result = run_procurement(
      std::move(model), positives, negatives, pc,
      [&](const TraceRow& row) { log.step(row.step, row.loss, row.value); });

  std::ostringstream trace;
  trace << "step,loss,value\n";
  for (const auto& row : result.trace) {
    trace << row.step << "," << row.loss << "," << fmt("%.17g", row.value) << "\n";
  }
  write_file(out / layout::kProcurementTrace, trace.str());

  Checkpoint ck{labels, pc, std::move(result.model), std::move(result.priors),
                std::nullopt, std::nullopt};
  save_checkpoint(out / layout::kProcurementCheckpoint, ck);
  log.line("# done wall=" + fmt("%.3f", log.elapsed()) + "s");
}

void cmd_adapt(const ExperimentConfig& config) {
  const fs::path out = config.output_dir();
  auto& audit = AccessAudit::instance();
  const std::size_t source_images_before = audit.images(DataDomain::kSource);
  const std::size_t target_labels_before = audit.labels(DataDomain::kTarget);

  Checkpoint ck = load_stage_checkpoint(out / layout::kProcurementCheckpoint, "procure");
  const std::uint64_t stored = checksum(ck.model.all_parameters());
  const auto images = load_unlabeled_corpus(config.target_root(), DataDomain::kTarget);
  if (images.empty()) fail(ErrorKind::kData, "target corpus has no images");
  const Matrix inputs = to_matrix(images);
  check_input_shape(inputs, ck.model, config.target_root());

  DeploymentModel model(ck.model, ck.priors);
  AdaptationConfig ac = config.adaptation;
  ac.seed = stage_seed(config, kSeedAdaptation);

  StepLog log(out / layout::kAdaptLog);
  log.line("# adapt seed=" + std::to_string(config.seed) + " beta=" + fmt("%g", ac.beta) +
           " samples=" + std::to_string(images.size()));
  const auto trace = run_adaptation(
      model, inputs, ac, [&](const AdaptationTraceRow& row, const DeploymentModel&) {
        log.step(row.step, "L_d", row.total);
      });

  const std::uint64_t after = model.frozen_checksum();
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016" PRIx64, after);
  if (after != stored) {
    log.line(std::string("frozen: VIOLATED checksum=") + hex);
    fail(ErrorKind::kFrozenParameterViolation,
         "frozen parameters (M, Fs, D, G) changed during adaptation");
  }
  log.line(std::string("frozen: OK checksum=") + hex);
  const std::size_t source_images = audit.images(DataDomain::kSource) - source_images_before;
  const std::size_t target_labels = audit.labels(DataDomain::kTarget) - target_labels_before;
  log.line("access: source_images=" + std::to_string(source_images) +
           " target_labels=" + std::to_string(target_labels));
  if (source_images != 0 || target_labels != 0) {
    fail(ErrorKind::kData, "adaptation read source images or target labels");
  }

  std::ostringstream csv;
  csv << "step,L_d1,L_d2,L_d\n";
  for (const auto& row : trace) {
    csv << row.step << "," << fmt("%.17g", row.d1) << "," << fmt("%.17g", row.d2) << ","
        << fmt("%.17g", row.total) << "\n";
  }
  write_file(out / layout::kAdaptationTrace, csv.str());

  ck.target_extractor = model.target_extractor();
  ck.adaptation = ac;
  save_checkpoint(out / layout::kAdaptedCheckpoint, ck);
}

MetricReport cmd_eval(const ExperimentConfig& config) {
  const fs::path ckpt = config.checkpoint_path();
  Checkpoint ck = load_stage_checkpoint(ckpt, "adapt");
  const auto& source_names = ck.labels.source_class_names;
  const int cs = ck.model.num_positive;
  if (static_cast<int>(source_names.size()) != cs) {
    fail(ErrorKind::kData, "checkpoint class names do not match its model");
  }
  const TargetClasses target = resolve_target_classes(config, source_names);
  std::vector<ClassId> source_ids(static_cast<std::size_t>(cs));
  for (int k = 0; k < cs; ++k) source_ids[k] = k;
  const LabelSpace label_space = LabelSpace::make(source_ids, target.ids);

  const auto corpus = load_labeled_corpus(config.target_root(), target.names, target.ids,
                                          DataDomain::kTarget);
  if (corpus.empty()) fail(ErrorKind::kData, "target corpus has no images");
  const Matrix inputs = to_matrix(corpus);
  check_input_shape(inputs, ck.model, config.target_root());

  const SsmComplement mode =
      ck.adaptation ? ck.adaptation->ssm_complement : config.adaptation.ssm_complement;
  DeploymentModel model = ck.target_extractor
                              ? DeploymentModel(ck.model, ck.priors, *ck.target_extractor)
                              : DeploymentModel(ck.model, ck.priors);
  const Matrix v = model.backbone_features(inputs);
  const auto predicted = predict_with_unknown(model.target_logits(v), cs);
  const auto ssm = model.ssm(v, mode);

  std::vector<PredictionRecord> records;
  std::map<std::string, std::vector<double>> populations;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    records.push_back({corpus[i].id, predicted[i], corpus[i].label, ssm[i]});
    const bool is_private = label_space.is_target_private(corpus[i].label);
    populations[is_private ? "target-private" : "target-shared"].push_back(ssm[i].w);
  }
  const MetricReport report = evaluate(records, label_space);
  const SsmHistogram histogram = ssm_histogram(populations, config.eval.histogram_bins);
  write_eval_outputs(config.output_dir() / layout::kEval, report, records, label_space, target,
                     cs, histogram);
  return report;
}

std::string report_to_json(const MetricReport& report,
                           const std::vector<std::string>& class_names) {
  json rows = json::array();
  for (const auto& [id, s] : report.per_class) {
    rows.push_back({{"class", class_label(id, class_names)},
                    {"id", id},
                    {"count", s.count},
                    {"correct", s.correct},
                    {"accuracy", s.accuracy}});
  }
  json doc = {{"t_avg", report.t_avg}, {"per_class", rows}};
  doc["t_unk"] = report.t_unk ? json(*report.t_unk) : json(nullptr);
  return doc.dump(2) + "\n";
}

MetricReport report_from_json(const std::string& text) {
  MetricReport r;
  try {
    const json doc = json::parse(text);
    r.t_avg = doc.at("t_avg").get<double>();
    if (!doc.at("t_unk").is_null()) r.t_unk = doc.at("t_unk").get<double>();
    for (const auto& row : doc.at("per_class")) {
      r.per_class[row.at("id").get<ClassId>()] = {row.at("count").get<long>(),
                                                   row.at("correct").get<long>(),
                                                   row.at("accuracy").get<double>()};
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::kData, std::string("malformed report: ") + e.what());
  }
  return r;
}

std::vector<GridCell> cmd_grid(const ExperimentConfig& config, const GridHook& hook) {
  const fs::path root = config.output_dir() / layout::kGrid;
  fs::create_directories(root);
  const int universe = config.grid.universe;

  // Universe corpora: every class in both domains, each cell links a subset.
  fs::path universe_source, universe_target;
  std::vector<std::string> names;
  const bool synthetic = config.data.source_root.empty() && config.data.target_root.empty();
  if (synthetic) {
    ExperimentConfig u = config;
    u.synthetic.task.num_classes = universe;
    u.synthetic.task.validate();
    u.synthetic.source_classes.clear();
    for (int c = 0; c < universe; ++c) u.synthetic.source_classes.push_back(c);
    u.synthetic.target_classes = u.synthetic.source_classes;
    universe_source = root / "data" / "source";
    universe_target = root / "data" / "target";
    const fs::path stamp = root / "data" / "spec.json";
    const std::string spec_text = config_to_json(u);
    if (!fs::exists(stamp) || read_file(stamp) != spec_text) {
      generate_synthetic_task(u.synthetic.task, u.synthetic.source_classes,
                              u.synthetic.target_classes, universe_source, universe_target,
                              stage_seed(u, kSeedSynthetic));
      write_file(stamp, spec_text);
    }
    for (int c = 0; c < universe; ++c) names.push_back(synthetic_class_name(c));
  } else {
    universe_source = config.source_root();
    universe_target = config.target_root();
    names = sorted_class_dirs(universe_source);
    if (static_cast<int>(names.size()) < universe) {
      fail(ErrorKind::kData, "source corpus has fewer classes than the grid universe");
    }
    names.resize(static_cast<std::size_t>(universe));
    for (const auto& n : names) {
      if (!fs::is_directory(universe_target / n)) {
        fail(ErrorKind::kData, "target corpus lacks class " + n + " of the grid universe");
      }
    }
  }

  GridSpec spec{universe, config.grid.source_private, config.grid.target_private};
  std::vector<GridCell> cells = category_gap_grid(spec, [&](const LabelSpace& ls, std::size_t index) {
    const int sp = static_cast<int>(ls.source_private().size());
    const int tp = static_cast<int>(ls.target_private().size());
    const std::string cell_name = "cell_" + std::to_string(sp) + "_" + std::to_string(tp);
    ExperimentConfig cell = config;
    cell.output_root = root.string();
    cell.run_name = cell_name;
    const fs::path report_path = cell.output_dir() / layout::kEval / "report.json";
    GridProgress progress{index, sp, tp, true, false};
    MetricReport report;
    if (fs::exists(report_path)) {
      report = report_from_json(read_file(report_path));
      progress.resumed = true;
    } else {
      std::vector<std::string> src, tgt;
      for (ClassId c : ls.source_labels()) src.push_back(names[c]);
      for (ClassId c : ls.target_labels()) tgt.push_back(names[c]);
      link_subset(universe_source, cell.output_dir() / "data" / "source", src);
      link_subset(universe_target, cell.output_dir() / "data" / "target", tgt);
      cell.data = {(cell.output_dir() / "data" / "source").string(),
                   (cell.output_dir() / "data" / "target").string(), src, tgt};
      cell.eval.checkpoint.clear();
      cell.seed = derive_seed(config.seed, {static_cast<std::uint64_t>(sp),
                                            static_cast<std::uint64_t>(tp)});
      if (cell.procurement.negative_mode == NegativeMode::kComposite) cmd_synth_negatives(cell);
      cmd_procure(cell);
      cmd_adapt(cell);
      report = cmd_eval(cell);
    }
    if (hook) hook(progress);
    return report;
  });

  // Infeasible cells still get a hook call so callers see every index.
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!cells[i].feasible && hook) {
      hook({i, cells[i].source_private, cells[i].target_private, false, false});
    }
  }

  std::ostringstream grid_csv, cells_csv;
  grid_csv << "source_private\\target_private";
  for (int tp : spec.target_private) grid_csv << "," << tp;
  grid_csv << "\n";
  cells_csv << "source_private,target_private,feasible,t_avg,t_unk\n";
  std::vector<std::vector<std::optional<double>>> heat;
  std::size_t i = 0;
  for (int sp : spec.source_private) {
    grid_csv << sp;
    heat.emplace_back();
    for (std::size_t k = 0; k < spec.target_private.size(); ++k, ++i) {
      const GridCell& cell = cells[i];
      if (cell.feasible) {
        grid_csv << "," << fmt("%.6f", cell.report->t_avg);
        heat.back().push_back(cell.report->t_avg);
      } else {
        grid_csv << ",infeasible";
        heat.back().push_back(std::nullopt);
      }
      cells_csv << sp << "," << cell.target_private << "," << (cell.feasible ? 1 : 0) << ","
                << (cell.feasible ? fmt("%.6f", cell.report->t_avg) : "") << ","
                << (cell.feasible && cell.report->t_unk ? fmt("%.6f", *cell.report->t_unk) : "")
                << "\n";
    }
    grid_csv << "\n";
  }
  write_file(root / "grid.csv", grid_csv.str());
  write_file(root / "grid_cells.csv", cells_csv.str());
  write_heatmap_png(root / "heatmap.png", heat);
  return cells;
}

std::vector<BetaSweepPoint> cmd_sweep_beta(const ExperimentConfig& config) {
  const fs::path source_ckpt = config.output_dir() / layout::kProcurementCheckpoint;
  if (!fs::exists(source_ckpt)) {
    fail(ErrorKind::kData, "checkpoint " + source_ckpt.string() + " not found (run procure first)");
  }
  const fs::path root = config.output_dir() / layout::kSweep;
  std::vector<BetaSweepPoint> points;
  std::ostringstream csv;
  csv << "beta,t_avg,t_unk\n";
  for (double beta : config.sweep.betas) {
    ExperimentConfig point = config;
    point.output_root = root.string();
    point.run_name = "beta_" + fmt("%g", beta);
    point.data.source_root = config.source_root().string();
    point.data.target_root = config.target_root().string();
    point.eval.checkpoint.clear();
    point.adaptation.beta = beta;
    fs::create_directories(point.output_dir());
    const fs::path link = point.output_dir() / layout::kProcurementCheckpoint;
    fs::remove(link);
    fs::create_symlink(fs::absolute(source_ckpt), link);
    cmd_adapt(point);
    points.push_back({beta, cmd_eval(point)});
    const MetricReport& r = points.back().report;
    csv << fmt("%g", beta) << "," << fmt("%.6f", r.t_avg) << ","
        << (r.t_unk ? fmt("%.6f", *r.t_unk) : "") << "\n";
  }
  write_file(root / "beta_sweep.csv", csv.str());
  return points;
}

void write_error_record(const fs::path& dir, std::string_view command, ErrorKind kind,
                        const std::string& message, std::optional<long> step) {
  json doc = {{"command", std::string(command)},
              {"error", std::string(to_string(kind))},
              {"exit_code", exit_code(kind)},
              {"message", message}};
  if (step) doc["step"] = *step;
  std::error_code ec;
  fs::create_directories(dir, ec);
  std::ofstream out(dir / layout::kError);
  out << doc.dump(2) << "\n";
}

int run_command(Command command, const ExperimentConfig& config, std::ostream& err) {
  const fs::path dir = config.output_dir();
  const std::string name(to_string(command));
  auto report = [&](ErrorKind kind, const std::string& message, std::optional<long> step) {
    err << "sfda " << name << ": " << to_string(kind) << ": " << message << "\n";
    write_error_record(dir, name, kind, message, step);
    return exit_code(kind);
  };
  try {
    switch (command) {
      case Command::kGenSynthetic: cmd_gen_synthetic(config); break;
      case Command::kSynthNegatives: cmd_synth_negatives(config); break;
      case Command::kProcure: cmd_procure(config); break;
      case Command::kAdapt: cmd_adapt(config); break;
      case Command::kEval: cmd_eval(config); break;
      case Command::kGrid: cmd_grid(config); break;
      case Command::kSweepBeta: cmd_sweep_beta(config); break;
    }
  } catch (const TrainingDivergedError& e) {
    return report(e.kind(), e.what(), e.step());
  } catch (const Error& e) {
    return report(e.kind(), e.what(), std::nullopt);
  } catch (const fs::filesystem_error& e) {
    return report(ErrorKind::kData, e.what(), std::nullopt);
  }
  std::error_code ec;
  fs::remove(dir / layout::kError, ec);
  return 0;
}

}  // namespace sfda::harness
