// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#include "sfda/label_space.hpp"

#include <algorithm>
#include <iterator>
#include <regex>

#include <nlohmann/json.hpp>

#include "sfda/error.hpp"
#include "sfda/rng.hpp"

namespace sfda {
namespace {

std::vector<ClassId> sorted_unique(std::vector<ClassId> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

bool contains(const std::vector<ClassId>& sorted, ClassId c) {
  return std::binary_search(sorted.begin(), sorted.end(), c);
}

}  // namespace

LabelSpace LabelSpace::make(std::vector<ClassId> source,
                            std::vector<ClassId> target) {
  if (source.empty()) {
    fail(ErrorKind::kInvalidConfiguration, "source label set is empty");
  }
  LabelSpace ls;
  ls.source_ = sorted_unique(std::move(source));
  ls.target_ = sorted_unique(std::move(target));
  std::set_intersection(ls.source_.begin(), ls.source_.end(),
                        ls.target_.begin(), ls.target_.end(),
                        std::back_inserter(ls.shared_));
  std::set_difference(ls.source_.begin(), ls.source_.end(),
                      ls.target_.begin(), ls.target_.end(),
                      std::back_inserter(ls.source_private_));
  std::set_difference(ls.target_.begin(), ls.target_.end(),
                      ls.source_.begin(), ls.source_.end(),
                      std::back_inserter(ls.target_private_));
  return ls;
}

bool LabelSpace::in_source(ClassId c) const { return contains(source_, c); }
bool LabelSpace::in_target(ClassId c) const { return contains(target_, c); }
bool LabelSpace::is_shared(ClassId c) const { return contains(shared_, c); }
bool LabelSpace::is_target_private(ClassId c) const {
  return contains(target_private_, c);
}

NegativeClassTable NegativeClassTable::build(int num_positive,
                                             std::int64_t num_negative_requested,
                                             std::uint64_t seed) {
  if (num_positive < 2) {
    fail(ErrorKind::kInvalidConfiguration,
         "negative table needs at least 2 positive classes, got " +
             std::to_string(num_positive));
  }
  if (num_negative_requested < 0) {
    fail(ErrorKind::kInvalidConfiguration,
         "requested negative class count is negative");
  }
  std::vector<ClassPair> all;
  all.reserve(static_cast<std::size_t>(max_pairs(num_positive)));
  for (ClassId i = 0; i < num_positive; ++i) {
    for (ClassId j = i + 1; j < num_positive; ++j) all.push_back({i, j});
  }

  NegativeClassTable table;
  table.num_positive_ = num_positive;
  if (num_negative_requested >= static_cast<std::int64_t>(all.size())) {
    table.pairs_ = std::move(all);
    return table;
  }
  // Fisher-Yates with an explicit draw so the subset does not depend on the
  // standard library's shuffle implementation.
  Rng rng(seed);
  for (std::size_t i = all.size() - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(all[i], all[pick(rng)]);
  }
  all.resize(static_cast<std::size_t>(num_negative_requested));
  std::sort(all.begin(), all.end());
  table.pairs_ = std::move(all);
  return table;
}

NegativeClassTable NegativeClassTable::from_pairs(int num_positive,
                                                  std::vector<ClassPair> pairs) {
  if (num_positive < 2) {
    fail(ErrorKind::kInvalidConfiguration,
         "negative table needs at least 2 positive classes");
  }
  for (const auto& p : pairs) {
    if (p.first < 0 || p.second >= num_positive || p.first >= p.second) {
      fail(ErrorKind::kInvalidConfiguration,
           "invalid negative pair (" + std::to_string(p.first) + "," +
               std::to_string(p.second) + ")");
    }
  }
  std::sort(pairs.begin(), pairs.end());
  if (std::adjacent_find(pairs.begin(), pairs.end()) != pairs.end()) {
    fail(ErrorKind::kInvalidConfiguration, "duplicate negative pair");
  }
  NegativeClassTable table;
  table.num_positive_ = num_positive;
  table.pairs_ = std::move(pairs);
  return table;
}

ClassPair NegativeClassTable::pair_of(int output_index) const {
  const int rank = output_index - num_positive_;
  if (rank < 0 || rank >= num_negative()) {
    fail(ErrorKind::kInvalidInput,
         "output index " + std::to_string(output_index) +
             " is not a negative class");
  }
  return pairs_[static_cast<std::size_t>(rank)];
}

std::optional<int> NegativeClassTable::index_of(ClassPair pair) const {
  if (pair.first > pair.second) std::swap(pair.first, pair.second);
  auto it = std::lower_bound(pairs_.begin(), pairs_.end(), pair);
  if (it == pairs_.end() || *it != pair) return std::nullopt;
  return num_positive_ + static_cast<int>(it - pairs_.begin());
}

std::string format_table_entry(ClassPair pair, int output_index) {
  return "(" + std::to_string(pair.first) + "," + std::to_string(pair.second) +
         ")->" + std::to_string(output_index);
}

std::pair<ClassPair, int> parse_table_entry(const std::string& text) {
  static const std::regex kEntry(R"(\((\d+),(\d+)\)->(\d+))");
  std::smatch m;
  if (!std::regex_match(text, m, kEntry)) {
    fail(ErrorKind::kInvalidConfiguration,
         "malformed negative table entry '" + text + "'");
  }
  return {{std::stoi(m[1]), std::stoi(m[2])}, std::stoi(m[3])};
}

std::string_view to_string(PopulationRole role) {
  switch (role) {
    case PopulationRole::kSourceShared:
      return "source-shared";
    case PopulationRole::kSourcePrivate:
      return "source-private";
    case PopulationRole::kNegativeSource:
      return "negative-source";
    case PopulationRole::kTargetShared:
      return "target-shared";
    case PopulationRole::kTargetPrivate:
      return "target-private";
    case PopulationRole::kTargetAll:
      return "target-all";
  }
  return "unknown";
}

bool is_source_role(PopulationRole role) {
  return role == PopulationRole::kSourceShared ||
         role == PopulationRole::kSourcePrivate ||
         role == PopulationRole::kNegativeSource;
}

SamplePopulation SamplePopulation::make(PopulationRole role,
                                        std::vector<Sample> samples) {
  const bool labeled = is_source_role(role);
  for (const auto& s : samples) {
    if (s.label.has_value() != labeled) {
      fail(ErrorKind::kInvalidInput,
           "sample '" + s.id + "' in " + std::string(to_string(role)) +
               (labeled ? " population is missing a label"
                        : " population must not carry a label"));
    }
  }
  SamplePopulation pop;
  pop.role_ = role;
  pop.samples_ = std::move(samples);
  return pop;
}

std::string LabelManifest::to_text() const {
  nlohmann::json j;
  j["version"] = kVersion;
  j["source_classes"] = source_class_names;
  if (!target_class_names.empty()) j["target_classes"] = target_class_names;
  std::vector<std::string> entries;
  for (int k = 0; k < table.num_negative(); ++k) {
    const int index = table.num_positive() + k;
    entries.push_back(format_table_entry(table.pair_of(index), index));
  }
  j["negative_table"] = entries;
  j["seed"] = seed;
  return j.dump(2) + "\n";
}

LabelManifest LabelManifest::from_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kInvalidConfiguration,
         std::string("label manifest is not valid JSON: ") + e.what());
  }
  if (j.value("version", 0) != kVersion) {
    fail(ErrorKind::kInvalidConfiguration,
         "unsupported label manifest version");
  }
  LabelManifest m;
  try {
    m.source_class_names =
        j.at("source_classes").get<std::vector<std::string>>();
    if (j.contains("target_classes")) {
      m.target_class_names =
          j.at("target_classes").get<std::vector<std::string>>();
    }
    m.seed = j.at("seed").get<std::uint64_t>();
    const int num_positive = static_cast<int>(m.source_class_names.size());
    std::vector<ClassPair> pairs;
    int expected = num_positive;
    for (const auto& e : j.at("negative_table")) {
      auto [pair, index] = parse_table_entry(e.get<std::string>());
      if (index != expected++) {
        fail(ErrorKind::kInvalidConfiguration,
             "negative table indices are not contiguous");
      }
      pairs.push_back(pair);
    }
    const auto sorted = pairs;
    m.table = NegativeClassTable::from_pairs(num_positive, std::move(pairs));
    if (m.table.pairs() != sorted) {
      fail(ErrorKind::kInvalidConfiguration,
           "negative table entries are not in lexicographic order");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kInvalidConfiguration,
         std::string("label manifest: ") + e.what());
  }
  return m;
}

}  // namespace sfda
