// Copyright 2026 The flowgraph Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "flowgraph/graphbuild.hpp"

#include <gtest/gtest.h>

#include <set>

#include "flowgraph/rng.hpp"
#include "oracles.hpp"

namespace flowgraph {
namespace {

using testing::brute_force_pairs;

Document blank(std::size_t n, EdgeSet gold = {}) {
  Document d{"g", {}, std::move(gold)};
  for (std::size_t i = 0; i < n; ++i) d.sentences.push_back({i, "s", SentenceType::kAction});
  return d;
}

TEST(BuildStructure, Linear) {
  const auto g = build_structure(4, Structure::kLinear, WindowPolicy::all());
  EXPECT_EQ(g.edges(), (EdgeSet{{0, 1}, {1, 2}, {2, 3}}));
}

TEST(BuildStructure, SemiCompleteAll) {
  const auto g = build_structure(3, Structure::kSemiComplete, WindowPolicy::all());
  EXPECT_EQ(g.edges(), (EdgeSet{{0, 1}, {0, 2}, {1, 2}}));
}

TEST(BuildStructure, SemiCompleteW3) {
  const auto g = build_structure(5, Structure::kSemiComplete, WindowPolicy::sentences(3));
  EXPECT_EQ(g.edges(), (EdgeSet{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {1, 4},
                                {2, 3}, {2, 4}, {3, 4}}));
  EXPECT_EQ(g.in_neighbors(4), (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_EQ(g.out_degree(0), 3u);
}

TEST(BuildStructure, SpanOneEqualsLinearAndZeroNodesFails) {
  for (std::size_t n = 1; n < 12; ++n) {
    EXPECT_EQ(build_structure(n, Structure::kSemiComplete, WindowPolicy::sentences(1)).edges(),
              build_structure(n, Structure::kLinear, WindowPolicy::all()).edges());
    EXPECT_EQ(build_structure(n, Structure::kSemiComplete, WindowPolicy::all()).edges().size(),
              n * (n - 1) / 2);
  }
  EXPECT_THROW(build_structure(0, Structure::kLinear, WindowPolicy::all()), ValidationError);
}

TEST(EnumerateCandidates, RetainsOutOfWindowGold) {
  const auto c = enumerate_candidates(blank(10, {{0, 9}, {0, 1}}), WindowPolicy::sentences(5));
  EXPECT_EQ(c.size(), 36u);
  EXPECT_EQ(c.positives(), 2u);
  EXPECT_EQ(c.pairs.back(), (Edge{8, 9}));
  EXPECT_EQ(c.pairs[5], (Edge{0, 9}));
  EXPECT_TRUE(std::is_sorted(c.pairs.begin(), c.pairs.end()));
  const auto no_retain =
      enumerate_candidates(blank(10, {{0, 9}}), WindowPolicy::sentences(5), false);
  EXPECT_EQ(no_retain.size(), 35u);
}

TEST(EnumerateCandidates, SmallCases) {
  EXPECT_EQ(enumerate_candidates(blank(6), WindowPolicy::all()).size(), 15u);
  EXPECT_EQ(enumerate_candidates(blank(4), WindowPolicy::sentences(3)).size(), 6u);
  EXPECT_THROW(enumerate_candidates(blank(1), WindowPolicy::all()), ValidationError);
}

TEST(ComparisonCount, Examples) {
  EXPECT_EQ(comparison_count(6, WindowPolicy::sentences(3)), 12u);
  EXPECT_EQ(comparison_count(2, WindowPolicy::all()), 1u);
  EXPECT_EQ(comparison_count(3, WindowPolicy::sentences(5)), 3u);
  EXPECT_EQ(comparison_count(10, WindowPolicy::sentences(5)), 35u);
  EXPECT_EQ(comparison_count(1, WindowPolicy::sentences(3)), 0u);
}

TEST(ComparisonCount, MatchesEnumerationProperty) {
  Rng rng(11);
  for (int trial = 0; trial < 400; ++trial) {
    const auto n = static_cast<std::size_t>(rng.between(2, 50));
    const std::size_t spans[] = {1, 2, 3, 4, 5, 7, 60};
    const auto w = rng.bernoulli(0.2) ? WindowPolicy::all()
                                      : WindowPolicy::sentences(spans[rng.below(7)]);
    // Gold edges inside the window only, so nothing extra is retained.
    EdgeSet gold;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (rng.bernoulli(0.5)) gold.emplace(i, i + 1);
    }
    const auto c = enumerate_candidates(blank(n, gold), w);
    ASSERT_EQ(c.size(), comparison_count(n, w));
    ASSERT_EQ(c.size(), brute_force_pairs(n, w));
  }
}

TEST(EnumerateCandidates, WindowsAreNested) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<std::size_t>(rng.between(2, 25));
    EdgeSet gold;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (rng.bernoulli(0.1)) gold.emplace(i, j);
      }
    }
    const auto doc = blank(n, gold);
    std::set<Edge> prev;
    for (auto w : {WindowPolicy::sentences(3), WindowPolicy::sentences(4),
                   WindowPolicy::sentences(5), WindowPolicy::all()}) {
      const auto c = enumerate_candidates(doc, w);
      std::set<Edge> cur(c.pairs.begin(), c.pairs.end());
      ASSERT_TRUE(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
      for (std::size_t k = 0; k < c.size(); ++k) {
        ASSERT_EQ(c.labels[k], gold.count(c.pairs[k]) ? 1 : 0);
      }
      ASSERT_EQ(c.positives(), gold.size());
      prev = std::move(cur);
    }
  }
}

TEST(EdgeRatio, Basics) {
  CandidateSet c;
  for (int k = 0; k < 10; ++k) {
    c.pairs.emplace_back(0, k + 1);
    c.labels.push_back(k < 2);
  }
  EXPECT_DOUBLE_EQ(edge_ratio(c), 0.2);
  EXPECT_THROW(edge_ratio(CandidateSet{}), ValidationError);
}

TEST(EdgeRatio, LinearChainUnderWall) {
  for (std::size_t n = 2; n < 30; ++n) {
    EdgeSet gold;
    for (std::size_t i = 0; i + 1 < n; ++i) gold.emplace(i, i + 1);
    EXPECT_NEAR(edge_ratio(enumerate_candidates(blank(n, gold), WindowPolicy::all())),
                2.0 / static_cast<double>(n), 1e-12);
  }
}

TEST(WindowPolicy, Parsing) {
  EXPECT_EQ(parse_window("all"), WindowPolicy::all());
  EXPECT_EQ(parse_window("W5"), WindowPolicy::sentences(5));
  EXPECT_EQ(parse_window("3"), WindowPolicy::sentences(3));
  EXPECT_FALSE(parse_window("0"));
  EXPECT_FALSE(parse_window("x"));
  EXPECT_EQ(WindowPolicy::sentences(5).span(3), 2u);
}

}  // namespace
}  // namespace flowgraph
