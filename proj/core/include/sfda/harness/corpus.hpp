// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "sfda/image.hpp"
#include "sfda/label_space.hpp"
#include "sfda/nn.hpp"

namespace sfda::harness {

enum class DataDomain { kSource = 0, kTarget = 1, kNegative = 2 };

// Process-wide counters of what the data-access layer has handed out. Every
// corpus read goes through the loaders below, so the counters show which
// stages touched source images or target labels.
class AccessAudit {
 public:
  static AccessAudit& instance();

  void record_images(DataDomain d, std::size_t n) { images_[idx(d)] += n; }
  void record_labels(DataDomain d, std::size_t n) { labels_[idx(d)] += n; }
  std::size_t images(DataDomain d) const { return images_[idx(d)]; }
  std::size_t labels(DataDomain d) const { return labels_[idx(d)]; }
  void reset();

 private:
  static std::size_t idx(DataDomain d) { return static_cast<std::size_t>(d); }
  std::array<std::atomic<std::size_t>, 3> images_{};
  std::array<std::atomic<std::size_t>, 3> labels_{};
};

struct LabeledImage {
  std::string id;  // path relative to the corpus root
  std::filesystem::path path;
  Image image;
  ClassId label = 0;
};

// `root/<class_name>/<image>.png`. Labels are the index of the directory name
// in `class_names`. Sub-directories not in `class_names` are a data error
// naming the offending file; missing class directories are a data error too.
std::vector<LabeledImage> load_labeled_corpus(const std::filesystem::path& root,
                                              const std::vector<std::string>& class_names,
                                              DataDomain domain);

// Like load_labeled_corpus, but labels are looked up by name in `ids` rather
// than by position.
std::vector<LabeledImage> load_labeled_corpus(
    const std::filesystem::path& root, const std::vector<std::string>& class_names,
    const std::vector<ClassId>& ids, DataDomain domain);

// Every PNG under `root` (recursively, sorted by path) without any label or
// path information.
std::vector<Image> load_unlabeled_corpus(const std::filesystem::path& root,
                                         DataDomain domain);

// One flattened CHW image per row. All images must share a shape.
Matrix to_matrix(const std::vector<Image>& images);
Matrix to_matrix(const std::vector<LabeledImage>& images);

}  // namespace sfda::harness
