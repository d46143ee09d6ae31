// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sfda/image.hpp"

namespace sfda {

// Dense class index. Source classes occupy 0..|Cs|-1; target-private classes
// are numbered after them.
using ClassId = int;

// Source and target label sets with their shared/private partitions. All sets
// are kept sorted and unique.
class LabelSpace {
 public:
  // Throws kInvalidConfiguration when `source` is empty. `target` may be empty
  // when the target label set is unknown (procurement/deployment time).
  static LabelSpace make(std::vector<ClassId> source,
                         std::vector<ClassId> target);

  const std::vector<ClassId>& source_labels() const { return source_; }
  const std::vector<ClassId>& target_labels() const { return target_; }
  const std::vector<ClassId>& shared() const { return shared_; }
  const std::vector<ClassId>& source_private() const { return source_private_; }
  const std::vector<ClassId>& target_private() const { return target_private_; }

  bool in_source(ClassId c) const;
  bool in_target(ClassId c) const;
  bool is_shared(ClassId c) const;
  bool is_target_private(ClassId c) const;

  bool is_closed_set() const {
    return source_private_.empty() && target_private_.empty();
  }

 private:
  std::vector<ClassId> source_;
  std::vector<ClassId> target_;
  std::vector<ClassId> shared_;
  std::vector<ClassId> source_private_;
  std::vector<ClassId> target_private_;
};

struct ClassPair {
  ClassId first = 0;
  ClassId second = 0;

  friend bool operator==(const ClassPair&, const ClassPair&) = default;
  friend auto operator<=>(const ClassPair&, const ClassPair&) = default;
};

// Bijection between unordered positive-class pairs (i < j) and negative-class
// output indices num_positive, num_positive+1, ... in lexicographic pair order.
class NegativeClassTable {
 public:
  // All C(num_positive, 2) pairs when the request covers them, otherwise a
  // seeded uniform subset of the requested size. Pure in its arguments.
  static NegativeClassTable build(int num_positive,
                                  std::int64_t num_negative_requested,
                                  std::uint64_t seed);

  // Validates and sorts an explicit pair list (used when loading manifests).
  static NegativeClassTable from_pairs(int num_positive,
                                       std::vector<ClassPair> pairs);

  int num_positive() const { return num_positive_; }
  int num_negative() const { return static_cast<int>(pairs_.size()); }
  int num_outputs() const { return num_positive_ + num_negative(); }
  const std::vector<ClassPair>& pairs() const { return pairs_; }

  // Output index -> pair. Throws kInvalidInput for non-negative indices.
  ClassPair pair_of(int output_index) const;
  std::optional<int> index_of(ClassPair pair) const;

  static std::int64_t max_pairs(int num_positive) {
    return static_cast<std::int64_t>(num_positive) * (num_positive - 1) / 2;
  }

 private:
  int num_positive_ = 0;
  std::vector<ClassPair> pairs_;
};

// Format "(i,j)->index" used by the label manifest.
std::string format_table_entry(ClassPair pair, int output_index);
std::pair<ClassPair, int> parse_table_entry(const std::string& text);

enum class PopulationRole {
  kSourceShared,
  kSourcePrivate,
  kNegativeSource,
  kTargetShared,
  kTargetPrivate,
  kTargetAll,
};

std::string_view to_string(PopulationRole role);
bool is_source_role(PopulationRole role);

struct Sample {
  std::string id;
  Image image;
  std::optional<ClassId> label;
};

// A tagged collection of samples. Source roles carry labels, target roles do
// not; `make` enforces this.
class SamplePopulation {
 public:
  static SamplePopulation make(PopulationRole role, std::vector<Sample> samples);

  PopulationRole role() const { return role_; }
  const std::vector<Sample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }

 private:
  PopulationRole role_ = PopulationRole::kTargetAll;
  std::vector<Sample> samples_;
};

// Persistent record of the class naming and negative-table bookkeeping.
struct LabelManifest {
  static constexpr int kVersion = 1;

  std::vector<std::string> source_class_names;
  std::vector<std::string> target_class_names;
  NegativeClassTable table;
  std::uint64_t seed = 0;

  std::string to_text() const;
  static LabelManifest from_text(const std::string& text);
};

}  // namespace sfda
