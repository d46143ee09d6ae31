// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cstddef>
#include <vector>

namespace sfda {

// Planar (CHW) image with intensities in [0, 1].
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(int c, int h, int w, double fill = 0.0)
      : channels(c), height(h), width(w),
        pixels(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t size() const { return pixels.size(); }

  double& at(int c, int y, int x) {
    return pixels[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double at(int c, int y, int x) const {
    return pixels[(static_cast<std::size_t>(c) * height + y) * width + x];
  }

  bool same_shape(const Image& other) const {
    return channels == other.channels && height == other.height &&
           width == other.width;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

}  // namespace sfda
