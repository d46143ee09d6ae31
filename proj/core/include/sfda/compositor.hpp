// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sfda/image.hpp"
#include "sfda/label_space.hpp"

namespace sfda {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

enum class SplitOrientation {
  // Endpoints on the left and right borders; the curve is a function of x and
  // the mask covers the pixels above it.
  kLeftRight,
  // Endpoints on the top and bottom borders; the mask covers pixels to the
  // left of the curve.
  kTopBottom,
};

// Binary mask splitting an image in two along a quadratic Bezier curve.
class SplineMask {
 public:
  static constexpr double kMinCoverage = 0.25;
  static constexpr double kMaxCoverage = 0.75;
  static constexpr int kMaxRetries = 20;
  static constexpr int kMinSide = 8;

  // Rasterizes the curve through control points (start, control, end).
  // Coordinates are continuous pixel coordinates: pixel (r, c) has its centre
  // at (c + 0.5, r + 0.5). No coverage clamp is applied here.
  static SplineMask from_control_points(int height, int width,
                                        SplitOrientation orientation,
                                        const std::array<Point, 3>& points);

  int height() const { return height_; }
  int width() const { return width_; }
  SplitOrientation orientation() const { return orientation_; }
  const std::array<Point, 3>& control_points() const { return points_; }
  const std::vector<std::uint8_t>& values() const { return mask_; }

  std::uint8_t at(int y, int x) const {
    return mask_[static_cast<std::size_t>(y) * width_ + x];
  }
  double coverage() const;
  SplineMask complement() const;

  friend bool operator==(const SplineMask& a, const SplineMask& b) {
    return a.height_ == b.height_ && a.width_ == b.width_ && a.mask_ == b.mask_;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  SplitOrientation orientation_ = SplitOrientation::kLeftRight;
  std::array<Point, 3> points_{};
  std::vector<std::uint8_t> mask_;
};

// Random spline mask: endpoints uniform on opposite borders (orientation by
// coin flip), middle control point uniform in the central 50% x 50% box.
// Resamples until coverage is in [0.25, 0.75]; after kMaxRetries failures falls
// back to a straight midline split. Deterministic in `seed`.
SplineMask generate_spline_mask(int height, int width, std::uint64_t seed);

// Pixelwise select: image_a where mask is 1, image_b elsewhere, all channels.
Image composite_pair(const Image& image_a, const Image& image_b,
                     const SplineMask& mask);

struct CompositeSample {
  Image image;
  int negative_label = 0;
  ClassPair parent_classes;
  std::pair<std::string, std::string> parent_ids;
  std::uint64_t mask_seed = 0;
};

// For every table entry, `per_class` composites from independently drawn
// parent pairs (one image of each class of the pair) and fresh masks. Output is
// ordered by negative label. Per-class streams derive from (seed, label).
std::vector<CompositeSample> build_negative_dataset(
    const SamplePopulation& source, const NegativeClassTable& table,
    int per_class, std::uint64_t seed);

}  // namespace sfda
