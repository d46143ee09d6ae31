// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sfda/deployment.hpp"
#include "sfda/label_space.hpp"
#include "sfda/procurement.hpp"

namespace sfda {

// Procurement checkpoint, optionally extended with an adapted Ft.
//
// File layout (little-endian):
//   "SFDACKPT" | u32 version | u64 manifest length | manifest (JSON text)
//   | u32 blob count | blobs
// Each blob: u32 name length | name | u8 element type (1 = f64) | u32 rank
//   | u64 dims[rank] | row-major data.
// Serialisation is canonical: load followed by save reproduces the input
// bytes.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  LabelManifest labels;
  ProcurementConfig procurement;
  ProcurementModel model;
  std::vector<ClassPrior> priors;
  std::optional<Mlp> target_extractor;
  std::optional<AdaptationConfig> adaptation;
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sfda
