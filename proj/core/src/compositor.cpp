// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#include "sfda/compositor.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>

#include "sfda/error.hpp"
#include "sfda/rng.hpp"

namespace sfda {
namespace {

// Quadratic Bezier coordinate.
double bezier(double p0, double p1, double p2, double t) {
  const double s = 1.0 - t;
  return s * s * p0 + 2.0 * s * t * p1 + t * t * p2;
}

// Curve "height" at abscissa `a`, where the curve runs along the first
// coordinate. Solved by bisection; the abscissa is monotone in t because the
// control abscissa lies between the endpoints.
double curve_at(double a0, double a1, double a2, double b0, double b1,
                double b2, double a) {
  double lo = 0.0, hi = 1.0;
  const bool increasing = a2 >= a0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double am = bezier(a0, a1, a2, mid);
    if ((am < a) == increasing) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return bezier(b0, b1, b2, 0.5 * (lo + hi));
}

SplineMask midline_mask(int height, int width) {
  const double h = height, w = width;
  return SplineMask::from_control_points(
      height, width, SplitOrientation::kLeftRight,
      {Point{0.0, h / 2}, Point{w / 2, h / 2}, Point{w, h / 2}});
}

}  // namespace

SplineMask SplineMask::from_control_points(int height, int width,
                                           SplitOrientation orientation,
                                           const std::array<Point, 3>& points) {
  if (height < kMinSide || width < kMinSide) {
    fail(ErrorKind::kInvalidConfiguration,
         "mask needs at least " + std::to_string(kMinSide) + "x" +
             std::to_string(kMinSide) + " pixels, got " +
             std::to_string(height) + "x" + std::to_string(width));
  }
  SplineMask m;
  m.height_ = height;
  m.width_ = width;
  m.orientation_ = orientation;
  m.points_ = points;
  m.mask_.assign(static_cast<std::size_t>(height) * width, 0);
  const auto& [p0, p1, p2] = points;
  if (orientation == SplitOrientation::kLeftRight) {
    for (int x = 0; x < width; ++x) {
      const double boundary =
          curve_at(p0.x, p1.x, p2.x, p0.y, p1.y, p2.y, x + 0.5);
      for (int y = 0; y < height; ++y) {
        m.mask_[static_cast<std::size_t>(y) * width + x] = (y + 0.5) < boundary;
      }
    }
  } else {
    for (int y = 0; y < height; ++y) {
      const double boundary =
          curve_at(p0.y, p1.y, p2.y, p0.x, p1.x, p2.x, y + 0.5);
      for (int x = 0; x < width; ++x) {
        m.mask_[static_cast<std::size_t>(y) * width + x] = (x + 0.5) < boundary;
      }
    }
  }
  return m;
}

double SplineMask::coverage() const {
  if (mask_.empty()) return 0.0;
  const auto ones = std::count(mask_.begin(), mask_.end(), std::uint8_t{1});
  return static_cast<double>(ones) / static_cast<double>(mask_.size());
}

SplineMask SplineMask::complement() const {
  SplineMask c = *this;
  for (auto& v : c.mask_) v = static_cast<std::uint8_t>(1 - v);
  return c;
}

SplineMask generate_spline_mask(int height, int width, std::uint64_t seed) {
  if (height < SplineMask::kMinSide || width < SplineMask::kMinSide) {
    fail(ErrorKind::kInvalidConfiguration,
         "image too small for a spline mask: " + std::to_string(height) + "x" +
             std::to_string(width));
  }
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double h = height, w = width;
  for (int attempt = 0; attempt <= SplineMask::kMaxRetries; ++attempt) {
    const bool left_right = unit(rng) < 0.5;
    const Point centre{w * (0.25 + 0.5 * unit(rng)),
                       h * (0.25 + 0.5 * unit(rng))};
    SplineMask m;
    if (left_right) {
      m = SplineMask::from_control_points(
          height, width, SplitOrientation::kLeftRight,
          {Point{0.0, h * unit(rng)}, centre, Point{w, h * unit(rng)}});
    } else {
      m = SplineMask::from_control_points(
          height, width, SplitOrientation::kTopBottom,
          {Point{w * unit(rng), 0.0}, centre, Point{w * unit(rng), h}});
    }
    const double cov = m.coverage();
    if (cov >= SplineMask::kMinCoverage && cov <= SplineMask::kMaxCoverage) {
      return m;
    }
  }
  return midline_mask(height, width);
}

Image composite_pair(const Image& image_a, const Image& image_b,
                     const SplineMask& mask) {
  if (!image_a.same_shape(image_b) || image_a.height != mask.height() ||
      image_a.width != mask.width()) {
    fail(ErrorKind::kInvalidInput, "composite_pair: shape mismatch");
  }
  Image out = image_b;
  for (int c = 0; c < image_a.channels; ++c) {
    for (int y = 0; y < image_a.height; ++y) {
      for (int x = 0; x < image_a.width; ++x) {
        if (mask.at(y, x)) out.at(c, y, x) = image_a.at(c, y, x);
      }
    }
  }
  return out;
}

std::vector<CompositeSample> build_negative_dataset(
    const SamplePopulation& source, const NegativeClassTable& table,
    int per_class, std::uint64_t seed) {
  if (per_class < 0) {
    fail(ErrorKind::kInvalidConfiguration, "per_class must be non-negative");
  }
  std::map<ClassId, std::vector<const Sample*>> by_class;
  for (const auto& s : source.samples()) {
    if (s.label) by_class[*s.label].push_back(&s);
  }
  for (const auto& p : table.pairs()) {
    for (ClassId c : {p.first, p.second}) {
      if (by_class[c].empty()) {
        fail(ErrorKind::kDatasetConstruction,
             "positive class " + std::to_string(c) +
                 " has no images to composite");
      }
    }
  }

  std::vector<CompositeSample> out;
  out.reserve(static_cast<std::size_t>(table.num_negative()) * per_class);
  for (int rank = 0; rank < table.num_negative(); ++rank) {
    const int label = table.num_positive() + rank;
    const ClassPair pair = table.pairs()[rank];
    const auto& pool_a = by_class[pair.first];
    const auto& pool_b = by_class[pair.second];
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(label)}));
    std::uniform_int_distribution<std::size_t> pick_a(0, pool_a.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_b(0, pool_b.size() - 1);
    for (int n = 0; n < per_class; ++n) {
      const Sample& a = *pool_a[pick_a(rng)];
      const Sample& b = *pool_b[pick_b(rng)];
      const std::uint64_t mask_seed = derive_seed(
          seed, {static_cast<std::uint64_t>(label), static_cast<std::uint64_t>(n)});
      const SplineMask mask =
          generate_spline_mask(a.image.height, a.image.width, mask_seed);
      CompositeSample cs;
      cs.image = composite_pair(a.image, b.image, mask);
      cs.negative_label = label;
      cs.parent_classes = pair;
      cs.parent_ids = {a.id, b.id};
      cs.mask_seed = mask_seed;
      out.push_back(std::move(cs));
    }
  }
  return out;
}

}  // namespace sfda
