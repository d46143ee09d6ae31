// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#include "sfda/label_space.hpp"

#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "sfda/error.hpp"

namespace sfda {
namespace {

std::vector<ClassId> range(int lo, int hi) {
  std::vector<ClassId> v(static_cast<std::size_t>(hi - lo + 1));
  std::iota(v.begin(), v.end(), lo);
  return v;
}

TEST(LabelSpaceTest, UniversalPartition) {
  const auto ls = LabelSpace::make(range(0, 5), range(2, 8));
  EXPECT_EQ(ls.shared(), range(2, 5));
  EXPECT_EQ(ls.source_private(), range(0, 1));
  EXPECT_EQ(ls.target_private(), range(6, 8));
  EXPECT_FALSE(ls.is_closed_set());
  EXPECT_TRUE(ls.is_shared(3));
  EXPECT_TRUE(ls.is_target_private(7));
  EXPECT_FALSE(ls.is_target_private(1));
}

TEST(LabelSpaceTest, DisjointLabelSets) {
  const auto ls = LabelSpace::make(range(0, 14), range(15, 30));
  EXPECT_TRUE(ls.shared().empty());
  EXPECT_EQ(ls.source_private().size(), 15u);
  EXPECT_EQ(ls.target_private().size(), 16u);
}

TEST(LabelSpaceTest, ClosedSet) {
  const auto ls = LabelSpace::make(range(0, 30), range(0, 30));
  EXPECT_TRUE(ls.source_private().empty());
  EXPECT_TRUE(ls.target_private().empty());
  EXPECT_TRUE(ls.is_closed_set());
}

TEST(LabelSpaceTest, EmptySourceIsConfigurationError) {
  try {
    LabelSpace::make({}, {1, 2});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidConfiguration);
  }
}

TEST(LabelSpaceTest, UnknownTargetSetIsAllowed) {
  const auto ls = LabelSpace::make({0, 1, 2}, {});
  EXPECT_TRUE(ls.shared().empty());
  EXPECT_EQ(ls.source_private().size(), 3u);
}

TEST(LabelSpaceTest, PartitionSizesOnRandomSets) {
  std::mt19937 rng(7);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ClassId> s, t;
    for (int c = 0; c < 40; ++c) {
      if (coin(rng)) s.push_back(c);
      if (coin(rng)) t.push_back(c);
    }
    if (s.empty()) s.push_back(0);
    const auto ls = LabelSpace::make(s, t);
    EXPECT_EQ(ls.shared().size() + ls.source_private().size(), ls.source_labels().size());
    EXPECT_EQ(ls.shared().size() + ls.target_private().size(), ls.target_labels().size());
    const std::set<ClassId> shared(ls.shared().begin(), ls.shared().end());
    for (ClassId c : ls.source_private()) EXPECT_FALSE(shared.count(c));
    for (ClassId c : ls.target_private()) EXPECT_FALSE(shared.count(c));
  }
}

TEST(NegativeClassTableTest, FullEnumerationOfThree) {
  const auto table = NegativeClassTable::build(3, 100, 12345);
  ASSERT_EQ(table.num_negative(), 3);
  EXPECT_EQ(table.pair_of(3), (ClassPair{0, 1}));
  EXPECT_EQ(table.pair_of(4), (ClassPair{0, 2}));
  EXPECT_EQ(table.pair_of(5), (ClassPair{1, 2}));
}

TEST(NegativeClassTableTest, HugeRequestGivesAllPairs) {
  EXPECT_EQ(NegativeClassTable::build(15, 1'000'000'000, 3).num_negative(), 105);
}

TEST(NegativeClassTableTest, SubsetOfLargeTableIsDeterministic) {
  const auto a = NegativeClassTable::build(1000, 600, 42);
  const auto b = NegativeClassTable::build(1000, 600, 42);
  ASSERT_EQ(a.num_negative(), 600);
  EXPECT_EQ(a.pairs(), b.pairs());
  const std::set<ClassPair> distinct(a.pairs().begin(), a.pairs().end());
  EXPECT_EQ(distinct.size(), 600u);
  const auto c = NegativeClassTable::build(1000, 600, 43);
  EXPECT_NE(a.pairs(), c.pairs());
}

TEST(NegativeClassTableTest, TooFewPositivesIsConfigurationError) {
  try {
    NegativeClassTable::build(1, 5, 0);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidConfiguration);
  }
}

TEST(NegativeClassTableTest, InvariantsAndRoundTrip) {
  for (int cs : {2, 3, 6, 11}) {
    for (std::int64_t requested : {std::int64_t{1}, std::int64_t{4}, std::int64_t{1000}}) {
      const auto table = NegativeClassTable::build(cs, requested, 9);
      EXPECT_EQ(table.num_negative(),
                std::min<std::int64_t>(requested, NegativeClassTable::max_pairs(cs)));
      std::set<ClassPair> seen;
      for (int k = 0; k < table.num_negative(); ++k) {
        const int index = cs + k;
        const ClassPair p = table.pair_of(index);
        EXPECT_LT(p.first, p.second);
        EXPECT_GE(p.first, 0);
        EXPECT_LT(p.second, cs);
        EXPECT_TRUE(seen.insert(p).second);
        EXPECT_EQ(table.index_of(p), index);
      }
      EXPECT_TRUE(std::is_sorted(table.pairs().begin(), table.pairs().end()));
    }
  }
}

TEST(NegativeClassTableTest, PositiveIndexHasNoPair) {
  const auto table = NegativeClassTable::build(4, 6, 0);
  EXPECT_THROW(table.pair_of(2), Error);
  EXPECT_FALSE(table.index_of({2, 2}).has_value());
}

TEST(NegativeClassTableTest, FromPairsRejectsInvalidEntries) {
  EXPECT_THROW(NegativeClassTable::from_pairs(3, {{1, 1}}), Error);
  EXPECT_THROW(NegativeClassTable::from_pairs(3, {{0, 3}}), Error);
  EXPECT_THROW(NegativeClassTable::from_pairs(3, {{0, 1}, {0, 1}}), Error);
}

TEST(LabelManifestTest, TableEntryFormat) {
  EXPECT_EQ(format_table_entry({1, 4}, 9), "(1,4)->9");
  const auto [pair, index] = parse_table_entry("(1,4)->9");
  EXPECT_EQ(pair, (ClassPair{1, 4}));
  EXPECT_EQ(index, 9);
  EXPECT_THROW(parse_table_entry("1,4->9"), Error);
}

TEST(LabelManifestTest, TextRoundTrip) {
  LabelManifest m{{"a", "b", "c", "d"}, {"c", "d", "e"}, NegativeClassTable::build(4, 4, 5), 77};
  const auto back = LabelManifest::from_text(m.to_text());
  EXPECT_EQ(back.source_class_names, m.source_class_names);
  EXPECT_EQ(back.target_class_names, m.target_class_names);
  EXPECT_EQ(back.table.pairs(), m.table.pairs());
  EXPECT_EQ(back.seed, 77u);
  EXPECT_EQ(back.to_text(), m.to_text());
}

TEST(SamplePopulationTest, LabelsOnlyOnSourceRoles) {
  Sample labeled{"x", Image(3, 2, 2), 1};
  Sample unlabeled{"y", Image(3, 2, 2), std::nullopt};
  EXPECT_NO_THROW(SamplePopulation::make(PopulationRole::kSourceShared, {labeled}));
  EXPECT_NO_THROW(SamplePopulation::make(PopulationRole::kTargetAll, {unlabeled}));
  EXPECT_THROW(SamplePopulation::make(PopulationRole::kTargetShared, {labeled}), Error);
  EXPECT_THROW(SamplePopulation::make(PopulationRole::kNegativeSource, {unlabeled}), Error);
}

}  // namespace
}  // namespace sfda
