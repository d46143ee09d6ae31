// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "sfda/image.hpp"

namespace sfda::harness {

// 8-bit RGB PNG <-> 3-channel Image in [0, 1].
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);

// Interleaved RGB bytes, used by the plot renderer.
void write_rgb_png(const std::filesystem::path& path, int width, int height,
                   const std::vector<std::uint8_t>& rgb);

// Rounds every pixel to the nearest 8-bit level, matching what a PNG round
// trip produces.
void quantize(Image& image);

}  // namespace sfda::harness
