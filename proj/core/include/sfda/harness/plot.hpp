// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "sfda/evaluation.hpp"

namespace sfda::harness {

// values[row][col] in [0, 1]; nullopt cells (infeasible) are drawn grey.
// Each cell is annotated with its value to two decimals.
void write_heatmap_png(const std::filesystem::path& path,
                       const std::vector<std::vector<std::optional<double>>>& values);

// Grouped bars, one colour per population in the histogram's key order.
void write_histogram_png(const std::filesystem::path& path,
                         const SsmHistogram& histogram);

}  // namespace sfda::harness
