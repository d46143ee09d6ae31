// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#include "sfda/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sfda/error.hpp"

namespace sfda {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

using nlohmann::json;

constexpr char kMagic[8] = {'S', 'F', 'D', 'A', 'C', 'K', 'P', 'T'};
constexpr std::uint8_t kFloat64 = 1;

json vector_json(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Vector json_vector(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json spec_json(const ModelSpec& s) {
  return {{"backbone",
           {{"kind", std::string(to_string(s.backbone.kind))},
            {"channels", s.backbone.channels},
            {"height", s.backbone.height},
            {"width", s.backbone.width},
            {"conv_channels", s.backbone.conv_channels}}},
          {"feature_hidden", s.feature_hidden},
          {"decoder_hidden", s.decoder_hidden},
          {"u_dim", s.u_dim}};
}

ModelSpec json_spec(const json& j) {
  ModelSpec s;
  const json& b = j.at("backbone");
  s.backbone.kind = parse_backbone_kind(b.at("kind").get<std::string>());
  s.backbone.channels = b.at("channels").get<int>();
  s.backbone.height = b.at("height").get<int>();
  s.backbone.width = b.at("width").get<int>();
  s.backbone.conv_channels = b.at("conv_channels").get<std::vector<int>>();
  s.feature_hidden = j.at("feature_hidden").get<std::vector<int>>();
  s.decoder_hidden = j.at("decoder_hidden").get<std::vector<int>>();
  s.u_dim = j.at("u_dim").get<int>();
  return s;
}

json procurement_json(const ProcurementConfig& c) {
  return {{"alpha", c.alpha},
          {"learning_rate", c.learning_rate},
          {"max_iter", c.max_iter},
          {"update_iter", c.update_iter},
          {"pretrain_steps", c.pretrain_steps},
          {"pretrain_learning_rate", c.pretrain_learning_rate},
          {"batch_size", c.batch_size},
          {"negative_ratio", c.negative_ratio},
          {"prior_logits", std::string(to_string(c.prior_logits))},
          {"negative_mode", std::string(to_string(c.negative_mode))},
          {"prior_negative_distance", c.prior_negative_distance},
          {"seed", c.seed}};
}

ProcurementConfig json_procurement(const json& j) {
  ProcurementConfig c;
  c.alpha = j.at("alpha").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.max_iter = j.at("max_iter").get<long>();
  c.update_iter = j.at("update_iter").get<long>();
  c.pretrain_steps = j.at("pretrain_steps").get<long>();
  c.pretrain_learning_rate = j.at("pretrain_learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.negative_ratio = j.at("negative_ratio").get<double>();
  c.prior_logits = parse_prior_logits(j.at("prior_logits").get<std::string>());
  c.negative_mode = parse_negative_mode(j.at("negative_mode").get<std::string>());
  c.prior_negative_distance = j.at("prior_negative_distance").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

json adaptation_json(const AdaptationConfig& c) {
  return {{"beta", c.beta},
          {"learning_rate", c.learning_rate},
          {"iterations", c.iterations},
          {"batch_size", c.batch_size},
          {"cache_ssm", c.cache_ssm},
          {"ssm_complement", std::string(to_string(c.ssm_complement))},
          {"seed", c.seed}};
}

AdaptationConfig json_adaptation(const json& j) {
  AdaptationConfig c;
  c.beta = j.at("beta").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.iterations = j.at("iterations").get<long>();
  c.batch_size = j.at("batch_size").get<int>();
  c.cache_ssm = j.at("cache_ssm").get<bool>();
  c.ssm_complement = parse_ssm_complement(j.at("ssm_complement").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    T value;
    std::memcpy(&value, take(sizeof(T)).data(), sizeof(T));
    return value;
  }

  std::string_view take(std::size_t n) {
    if (n > bytes_.size() - pos_) {
      fail(ErrorKind::kData, "checkpoint is truncated");
    }
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

void put_blob(std::string& out, const std::string& name, const Matrix& m) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put<std::uint8_t>(out, kFloat64);
  put<std::uint32_t>(out, 2);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) put<double>(out, m(r, c));
  }
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ck) {
  json manifest;
  manifest["version"] = Checkpoint::kVersion;
  manifest["dims"] = {{"input_dim", ck.model.backbone.input_dim()},
                      {"v_dim", ck.model.v_dim()},
                      {"u_dim", ck.model.u_dim()},
                      {"num_positive", ck.model.num_positive},
                      {"num_negative", ck.model.num_negative},
                      {"num_outputs", ck.model.num_outputs()}};
  manifest["model"] = spec_json(ck.model.spec);
  manifest["labels"] = json::parse(ck.labels.to_text());
  manifest["procurement"] = procurement_json(ck.procurement);
  json priors = json::array();
  for (const auto& p : ck.priors) {
    priors.push_back({{"class", p.class_id},
                      {"mean", vector_json(p.mean)},
                      {"variance", vector_json(p.variance)}});
  }
  manifest["priors"] = priors;
  if (ck.adaptation) manifest["adaptation"] = adaptation_json(*ck.adaptation);

  std::vector<ConstParamRef> blobs = ck.model.all_parameters();
  if (ck.target_extractor) {
    for (auto& p : ck.target_extractor->parameters("Ft")) blobs.push_back(p);
  }

  const std::string text = manifest.dump(2);
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, Checkpoint::kVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(blobs.size()));
  for (const auto& b : blobs) put_blob(out, b.name, *b.value);
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) {
    fail(ErrorKind::kData, "not a checkpoint file (bad magic)");
  }
  if (in.get<std::uint32_t>() != Checkpoint::kVersion) {
    fail(ErrorKind::kData, "unsupported checkpoint version");
  }
  const auto manifest_len = in.get<std::uint64_t>();
  Checkpoint ck;
  try {
    const json manifest = json::parse(in.take(manifest_len));
    ck.labels = LabelManifest::from_text(manifest.at("labels").dump());
    ck.procurement = json_procurement(manifest.at("procurement"));
    const json& dims = manifest.at("dims");
    ck.model = ProcurementModel::create(json_spec(manifest.at("model")),
                                        dims.at("num_positive").get<int>(),
                                        dims.at("num_negative").get<int>(), 0);
    for (const auto& p : manifest.at("priors")) {
      ck.priors.push_back({p.at("class").get<int>(), json_vector(p.at("mean")),
                           json_vector(p.at("variance"))});
    }
    if (manifest.contains("adaptation")) {
      ck.adaptation = json_adaptation(manifest.at("adaptation"));
      ck.target_extractor = ck.model.feature_extractor;
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::kData, std::string("checkpoint manifest: ") + e.what());
  }

  std::map<std::string, Matrix*> slots;
  for (auto& p : ck.model.backbone.parameters("M")) slots[p.name] = p.value;
  for (auto& p : ck.model.head_parameters()) slots[p.name] = p.value;
  if (ck.target_extractor) {
    for (auto& p : ck.target_extractor->parameters("Ft")) slots[p.name] = p.value;
  }

  const auto count = in.get<std::uint32_t>();
  if (count != slots.size()) {
    fail(ErrorKind::kData, "checkpoint has " + std::to_string(count) +
                               " parameter blobs, expected " +
                               std::to_string(slots.size()));
  }
  for (std::uint32_t b = 0; b < count; ++b) {
    const auto name_len = in.get<std::uint32_t>();
    const std::string name(in.take(name_len));
    if (in.get<std::uint8_t>() != kFloat64 || in.get<std::uint32_t>() != 2) {
      fail(ErrorKind::kData, "blob '" + name + "' has an unsupported layout");
    }
    const auto rows = in.get<std::uint64_t>();
    const auto cols = in.get<std::uint64_t>();
    auto it = slots.find(name);
    if (it == slots.end()) fail(ErrorKind::kData, "unexpected blob '" + name + "'");
    Matrix& m = *it->second;
    if (rows != static_cast<std::uint64_t>(m.rows()) ||
        cols != static_cast<std::uint64_t>(m.cols())) {
      fail(ErrorKind::kData, "blob '" + name + "' has the wrong shape");
    }
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = in.get<double>();
    }
    slots.erase(it);
  }
  if (!in.done()) fail(ErrorKind::kData, "trailing bytes after checkpoint");
  ck.model.validate();
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const std::string bytes = serialize_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kData, "cannot write checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kData, "cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace sfda
