// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#include "sfda/harness/corpus.hpp"

#include <algorithm>
#include <map>

#include "sfda/error.hpp"
#include "sfda/harness/png_io.hpp"

namespace sfda::harness {
namespace fs = std::filesystem;
namespace {

std::vector<fs::path> sorted_pngs(const fs::path& dir, bool recursive) {
  std::vector<fs::path> out;
  auto take = [&](const fs::directory_entry& e) {
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
  };
  if (recursive) {
    for (const auto& e : fs::recursive_directory_iterator(
             dir, fs::directory_options::follow_directory_symlink)) {
      take(e);
    }
  } else {
    for (const auto& e : fs::directory_iterator(dir)) take(e);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

AccessAudit& AccessAudit::instance() {
  static AccessAudit audit;
  return audit;
}

void AccessAudit::reset() {
  for (auto& c : images_) c = 0;
  for (auto& c : labels_) c = 0;
}

std::vector<LabeledImage> load_labeled_corpus(const fs::path& root,
                                              const std::vector<std::string>& class_names,
                                              DataDomain domain) {
  std::vector<ClassId> ids(class_names.size());
  for (std::size_t k = 0; k < ids.size(); ++k) ids[k] = static_cast<ClassId>(k);
  return load_labeled_corpus(root, class_names, ids, domain);
}

std::vector<LabeledImage> load_labeled_corpus(const fs::path& root,
                                              const std::vector<std::string>& class_names,
                                              const std::vector<ClassId>& ids,
                                              DataDomain domain) {
  if (!fs::is_directory(root)) {
    fail(ErrorKind::kData, "corpus directory " + root.string() + " does not exist");
  }
  std::map<std::string, ClassId> by_name;
  for (std::size_t k = 0; k < class_names.size(); ++k) by_name[class_names[k]] = ids[k];

  for (const auto& e : fs::directory_iterator(root)) {
    if (!e.is_directory()) continue;
    const std::string name = e.path().filename().string();
    if (!by_name.count(name)) {
      const auto files = sorted_pngs(e.path(), false);
      const fs::path culprit = files.empty() ? e.path() : files.front();
      fail(ErrorKind::kData, "file " + culprit.string() + " has label '" + name +
                                 "', which is not a declared class");
    }
  }

  std::vector<LabeledImage> out;
  for (std::size_t k = 0; k < class_names.size(); ++k) {
    const fs::path dir = root / class_names[k];
    if (!fs::is_directory(dir)) {
      fail(ErrorKind::kData, "class directory " + dir.string() + " is missing");
    }
    for (const auto& p : sorted_pngs(dir, false)) {
      out.push_back({fs::relative(p, root).generic_string(), p, read_png(p), ids[k]});
    }
  }
  AccessAudit::instance().record_images(domain, out.size());
  AccessAudit::instance().record_labels(domain, out.size());
  return out;
}

std::vector<Image> load_unlabeled_corpus(const fs::path& root, DataDomain domain) {
  if (!fs::is_directory(root)) {
    fail(ErrorKind::kData, "corpus directory " + root.string() + " does not exist");
  }
  std::vector<Image> out;
  for (const auto& p : sorted_pngs(root, true)) out.push_back(read_png(p));
  AccessAudit::instance().record_images(domain, out.size());
  return out;
}

Matrix to_matrix(const std::vector<Image>& images) {
  if (images.empty()) return Matrix(0, 0);
  const auto dim = static_cast<Eigen::Index>(images.front().size());
  Matrix m(static_cast<Eigen::Index>(images.size()), dim);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!images[i].same_shape(images.front())) {
      fail(ErrorKind::kData, "corpus images do not share a shape");
    }
    m.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXd>(images[i].pixels.data(), dim);
  }
  return m;
}

Matrix to_matrix(const std::vector<LabeledImage>& images) {
  std::vector<Image> plain;
  plain.reserve(images.size());
  for (const auto& li : images) plain.push_back(li.image);
  return to_matrix(plain);
}

}  // namespace sfda::harness
