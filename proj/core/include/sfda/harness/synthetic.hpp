// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sfda/image.hpp"

namespace sfda::harness {

// Target-side corruption: hue rotation, Gaussian blur and a random affine
// jitter (rotation plus translation) bounded by the given magnitudes.
struct DomainShift {
  double hue_degrees = 15.0;
  double blur_sigma = 0.8;
  double jitter_pixels = 2.0;
  double rotation_degrees = 10.0;

  bool is_zero() const {
    return hue_degrees == 0.0 && blur_sigma == 0.0 && jitter_pixels == 0.0 &&
           rotation_degrees == 0.0;
  }
};

// Procedural image classification task. Classes are drawn from a vocabulary of
// `num_parts` local parts (a striped, coloured disc each). Class c < num_parts
// is made of part c alone; higher classes each combine two parts, so they
// share local features with the single-part classes without matching any of
// them.
struct SyntheticTaskSpec {
  int num_classes = 9;
  int images_per_class = 50;
  int image_size = 32;
  int num_parts = 6;
  int patches_per_image = 6;
  double patch_radius = 5.0;
  DomainShift shift;

  void validate() const;
};

std::string synthetic_class_name(int class_index);

// Parts making up class `class_index`.
std::vector<int> class_parts(const SyntheticTaskSpec& spec, int class_index);

Image render_source_image(const SyntheticTaskSpec& spec, int class_index,
                          int image_index, std::uint64_t seed);

// Identity when `shift.is_zero()`.
Image apply_shift(const Image& image, const DomainShift& shift, std::uint64_t seed);

// Writes `source_root/<class>/<n>.png` for the source classes and the shifted
// counterparts under `target_root` for the target classes. Target image n of a
// class is the shifted source image n of that class. Existing roots are
// replaced.
void generate_synthetic_task(const SyntheticTaskSpec& spec,
                             const std::vector<int>& source_classes,
                             const std::vector<int>& target_classes,
                             const std::filesystem::path& source_root,
                             const std::filesystem::path& target_root,
                             std::uint64_t seed);

}  // namespace sfda::harness
