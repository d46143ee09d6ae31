// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#include "sfda/harness/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sfda/error.hpp"

namespace sfda::harness {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& msg) {
  fail(ErrorKind::kInvalidConfiguration, msg);
}

json to_json(const ExperimentConfig& c) {
  const SyntheticTaskSpec& t = c.synthetic.task;
  const ProcurementConfig& p = c.procurement;
  const AdaptationConfig& a = c.adaptation;
  return {
      {"seed", c.seed},
      {"output_root", c.output_root},
      {"run_name", c.run_name},
      {"data",
       {{"source_root", c.data.source_root},
        {"target_root", c.data.target_root},
        {"source_classes", c.data.source_classes},
        {"target_classes", c.data.target_classes}}},
      {"synthetic",
       {{"num_classes", t.num_classes},
        {"images_per_class", t.images_per_class},
        {"image_size", t.image_size},
        {"num_parts", t.num_parts},
        {"patches_per_image", t.patches_per_image},
        {"patch_radius", t.patch_radius},
        {"shift",
         {{"hue_degrees", t.shift.hue_degrees},
          {"blur_sigma", t.shift.blur_sigma},
          {"jitter_pixels", t.shift.jitter_pixels},
          {"rotation_degrees", t.shift.rotation_degrees}}},
        {"source_classes", c.synthetic.source_classes},
        {"target_classes", c.synthetic.target_classes}}},
      {"negatives",
       {{"requested", c.negatives.requested}, {"per_class", c.negatives.per_class}}},
      {"model",
       {{"backbone", std::string(to_string(c.model.backbone.kind))},
        {"conv_channels", c.model.backbone.conv_channels},
        {"feature_hidden", c.model.feature_hidden},
        {"u_dim", c.model.u_dim},
        {"decoder_hidden", c.model.decoder_hidden}}},
      {"procurement",
       {{"alpha", p.alpha},
        {"learning_rate", p.learning_rate},
        {"max_iter", p.max_iter},
        {"update_iter", p.update_iter},
        {"pretrain_steps", p.pretrain_steps},
        {"pretrain_learning_rate", p.pretrain_learning_rate},
        {"batch_size", p.batch_size},
        {"negative_ratio", p.negative_ratio},
        {"prior_logits", std::string(to_string(p.prior_logits))},
        {"negative_mode", std::string(to_string(p.negative_mode))},
        {"prior_negative_distance", p.prior_negative_distance}}},
      {"adaptation",
       {{"beta", a.beta},
        {"learning_rate", a.learning_rate},
        {"iterations", a.iterations},
        {"batch_size", a.batch_size},
        {"cache_ssm", a.cache_ssm},
        {"ssm_complement", std::string(to_string(a.ssm_complement))}}},
      {"grid",
       {{"universe", c.grid.universe},
        {"source_private", c.grid.source_private},
        {"target_private", c.grid.target_private}}},
      {"sweep", {{"betas", c.sweep.betas}}},
      {"eval",
       {{"checkpoint", c.eval.checkpoint}, {"histogram_bins", c.eval.histogram_bins}}},
  };
}

bool same_kind(const json& schema, const json& value) {
  if (schema.is_boolean()) return value.is_boolean();
  if (schema.is_string()) return value.is_string();
  if (schema.is_number_unsigned()) return value.is_number_unsigned();
  if (schema.is_number_integer()) return value.is_number_integer();
  if (schema.is_number_float()) return value.is_number();
  if (schema.is_object()) return value.is_object();
  if (schema.is_array()) return value.is_array();
  return false;
}

// Every key of `doc` must exist in `schema` with a value of the same kind.
// Arrays are checked element-wise against the schema's first element; empty
// schema arrays hold strings.
void check_schema(const json& schema, const json& doc, const std::string& path) {
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!schema.contains(it.key())) config_error("unknown config key '" + key + "'");
    const json& s = schema.at(it.key());
    const json& v = it.value();
    if (!same_kind(s, v)) {
      // Non-negative integers are accepted where the schema holds an unsigned.
      const bool signed_ok = s.is_number_integer() && v.is_number_integer();
      if (!signed_ok) config_error("config key '" + key + "' has the wrong type");
    }
    if (s.is_object()) {
      check_schema(s, v, key);
    } else if (s.is_array()) {
      const json elem = s.empty() ? json("") : s.front();
      for (const json& e : v) {
        if (!same_kind(elem, e) && !(elem.is_number_integer() && e.is_number_integer())) {
          config_error("config key '" + key + "' has an element of the wrong type");
        }
      }
    }
  }
}

template <typename T>
T get(const json& j, const char* section, const char* key) {
  return j.at(section).at(key).get<T>();
}

ExperimentConfig from_json(const json& j) {
  ExperimentConfig c;
  if (j.at("seed").is_number_integer() && j.at("seed").get<std::int64_t>() < 0) {
    config_error("seed must be non-negative");
  }
  c.seed = j.at("seed").get<std::uint64_t>();
  c.output_root = j.at("output_root").get<std::string>();
  c.run_name = j.at("run_name").get<std::string>();

  c.data.source_root = get<std::string>(j, "data", "source_root");
  c.data.target_root = get<std::string>(j, "data", "target_root");
  c.data.source_classes = get<std::vector<std::string>>(j, "data", "source_classes");
  c.data.target_classes = get<std::vector<std::string>>(j, "data", "target_classes");

  const json& s = j.at("synthetic");
  SyntheticTaskSpec& t = c.synthetic.task;
  t.num_classes = s.at("num_classes").get<int>();
  t.images_per_class = s.at("images_per_class").get<int>();
  t.image_size = s.at("image_size").get<int>();
  t.num_parts = s.at("num_parts").get<int>();
  t.patches_per_image = s.at("patches_per_image").get<int>();
  t.patch_radius = s.at("patch_radius").get<double>();
  t.shift.hue_degrees = s.at("shift").at("hue_degrees").get<double>();
  t.shift.blur_sigma = s.at("shift").at("blur_sigma").get<double>();
  t.shift.jitter_pixels = s.at("shift").at("jitter_pixels").get<double>();
  t.shift.rotation_degrees = s.at("shift").at("rotation_degrees").get<double>();
  c.synthetic.source_classes = s.at("source_classes").get<std::vector<int>>();
  c.synthetic.target_classes = s.at("target_classes").get<std::vector<int>>();

  c.negatives.requested = get<std::int64_t>(j, "negatives", "requested");
  c.negatives.per_class = get<int>(j, "negatives", "per_class");

  const json& m = j.at("model");
  c.model.backbone.kind = parse_backbone_kind(m.at("backbone").get<std::string>());
  c.model.backbone.conv_channels = m.at("conv_channels").get<std::vector<int>>();
  c.model.feature_hidden = m.at("feature_hidden").get<std::vector<int>>();
  c.model.u_dim = m.at("u_dim").get<int>();
  c.model.decoder_hidden = m.at("decoder_hidden").get<std::vector<int>>();

  const json& p = j.at("procurement");
  ProcurementConfig& pc = c.procurement;
  pc.alpha = p.at("alpha").get<double>();
  pc.learning_rate = p.at("learning_rate").get<double>();
  pc.max_iter = p.at("max_iter").get<long>();
  pc.update_iter = p.at("update_iter").get<long>();
  pc.pretrain_steps = p.at("pretrain_steps").get<long>();
  pc.pretrain_learning_rate = p.at("pretrain_learning_rate").get<double>();
  pc.batch_size = p.at("batch_size").get<int>();
  pc.negative_ratio = p.at("negative_ratio").get<double>();
  pc.prior_logits = parse_prior_logits(p.at("prior_logits").get<std::string>());
  pc.negative_mode = parse_negative_mode(p.at("negative_mode").get<std::string>());
  pc.prior_negative_distance = p.at("prior_negative_distance").get<double>();

  const json& a = j.at("adaptation");
  AdaptationConfig& ac = c.adaptation;
  ac.beta = a.at("beta").get<double>();
  ac.learning_rate = a.at("learning_rate").get<double>();
  ac.iterations = a.at("iterations").get<long>();
  ac.batch_size = a.at("batch_size").get<int>();
  ac.cache_ssm = a.at("cache_ssm").get<bool>();
  ac.ssm_complement = parse_ssm_complement(a.at("ssm_complement").get<std::string>());

  c.grid.universe = get<int>(j, "grid", "universe");
  c.grid.source_private = get<std::vector<int>>(j, "grid", "source_private");
  c.grid.target_private = get<std::vector<int>>(j, "grid", "target_private");

  c.sweep.betas = get<std::vector<double>>(j, "sweep", "betas");

  c.eval.checkpoint = get<std::string>(j, "eval", "checkpoint");
  c.eval.histogram_bins = get<int>(j, "eval", "histogram_bins");
  return c;
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    config_error(what + " is not valid JSON: " + e.what());
  }
}

}  // namespace

fs::path ExperimentConfig::source_root() const {
  return data.source_root.empty() ? output_dir() / "data" / "source"
                                  : fs::path(data.source_root);
}

fs::path ExperimentConfig::target_root() const {
  return data.target_root.empty() ? output_dir() / "data" / "target"
                                  : fs::path(data.target_root);
}

fs::path ExperimentConfig::checkpoint_path() const {
  return eval.checkpoint.empty() ? output_dir() / "adapted.ckpt"
                                 : fs::path(eval.checkpoint);
}

void ExperimentConfig::validate() const {
  if (run_name.empty()) config_error("run_name must not be empty");
  synthetic.task.validate();
  if (synthetic.source_classes.empty()) {
    config_error("synthetic.source_classes must not be empty");
  }
  for (const auto* list : {&synthetic.source_classes, &synthetic.target_classes}) {
    for (int cls : *list) {
      if (cls < 0 || cls >= synthetic.task.num_classes) {
        config_error("synthetic class " + std::to_string(cls) + " out of range");
      }
    }
  }
  if (negatives.requested < -1) config_error("negatives.requested must be >= -1");
  if (negatives.per_class < 1) config_error("negatives.per_class must be >= 1");
  if (model.u_dim < 1) config_error("model.u_dim must be >= 1");
  for (const auto* widths :
       {&model.feature_hidden, &model.decoder_hidden, &model.backbone.conv_channels}) {
    for (int w : *widths) {
      if (w < 1) config_error("model widths must be >= 1");
    }
  }
  if (model.backbone.kind == BackboneSpec::Kind::kConv &&
      model.backbone.conv_channels.empty()) {
    config_error("model.conv_channels must not be empty for a conv backbone");
  }
  procurement.validate();
  adaptation.validate();
  if (grid.universe < 2 || grid.source_private.empty() || grid.target_private.empty()) {
    config_error("grid needs a universe >= 2 and non-empty axes");
  }
  for (const auto* axis : {&grid.source_private, &grid.target_private}) {
    for (int v : *axis) {
      if (v < 0 || v > grid.universe) config_error("grid axis value out of range");
    }
  }
  if (sweep.betas.empty()) config_error("sweep.betas must not be empty");
  for (double b : sweep.betas) {
    if (!(b >= 0.0)) config_error("sweep.betas must be >= 0");
  }
  if (eval.histogram_bins < 1) config_error("eval.histogram_bins must be >= 1");
}

ExperimentConfig default_config() { return ExperimentConfig{}; }

std::string config_to_json(const ExperimentConfig& config) {
  return to_json(config).dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text) {
  const json doc = parse_json(text, "config");
  if (!doc.is_object()) config_error("config must be a JSON object");
  json merged = to_json(default_config());
  check_schema(merged, doc, "");
  merged.merge_patch(doc);
  try {
    return from_json(merged);
  } catch (const json::exception& e) {
    config_error(std::string("invalid config: ") + e.what());
  }
}

ExperimentConfig apply_overrides(const ExperimentConfig& config,
                                 const std::vector<std::string>& overrides) {
  json doc = to_json(config);
  for (const std::string& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      config_error("override '" + item + "' is not of the form key=value");
    }
    const std::string key = item.substr(0, eq);
    const std::string raw = item.substr(eq + 1);
    json* node = &doc;
    std::stringstream parts(key);
    std::string part;
    while (std::getline(parts, part, '.')) {
      if (!node->is_object() || !node->contains(part)) {
        config_error("unknown config key '" + key + "'");
      }
      node = &(*node)[part];
    }
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    // Keep numeric-looking strings as strings where the schema wants one.
    if (node->is_string() && !value.is_string()) value = raw;
    *node = value;
  }
  return config_from_json(doc.dump());
}

ExperimentConfig load_config(const std::optional<fs::path>& file,
                             const std::vector<std::string>& overrides) {
  ExperimentConfig config;
  if (file) {
    std::ifstream in(*file);
    if (!in) config_error("cannot read config file " + file->string());
    std::stringstream buf;
    buf << in.rdbuf();
    config = config_from_json(buf.str());
  }
  config = apply_overrides(config, overrides);
  if (const char* root = std::getenv(kOutputRootEnv); root != nullptr && *root != '\0') {
    config.output_root = root;
  }
  config.validate();
  return config;
}

}  // namespace sfda::harness
