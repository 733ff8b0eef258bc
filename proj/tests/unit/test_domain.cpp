// Copyright 2026 The roadcond Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <array>
#include <stdexcept>

#include "roadcond/domain.hpp"

namespace roadcond {
namespace {

TEST(SeverityRank, DefaultOrderPositions) {
  const auto order = SeverityOrder::surface_default();
  EXPECT_EQ(severity_rank(SurfaceClass::kSevereSnow, order), 0u);
  EXPECT_EQ(severity_rank(SurfaceClass::kDry, order), 4u);
  EXPECT_EQ(severity_rank(SurfaceClass::kPoorVisibility, order), 2u);
  EXPECT_EQ(severity_rank(SurfaceClass::kSnow, order), 1u);
  EXPECT_EQ(severity_rank(SurfaceClass::kWet, order), 3u);
}

TEST(SeverityRank, RejectsNonPermutation) {
  EXPECT_THROW(SeverityOrder({0, 1, 1, 3, 4}), std::invalid_argument);
  EXPECT_THROW(SeverityOrder({0, 1, 2, 3, 7}), std::invalid_argument);
}

TEST(SeverityRank, MostSevereOfSet) {
  const auto order = SeverityOrder::surface_default();
  const std::array<std::size_t, 3> classes{index_of(SurfaceClass::kDry), index_of(SurfaceClass::kPoorVisibility),
                                           index_of(SurfaceClass::kWet)};
  EXPECT_EQ(order.most_severe(classes), index_of(SurfaceClass::kPoorVisibility));
  EXPECT_TRUE(order.more_severe(index_of(SurfaceClass::kWet), index_of(SurfaceClass::kDry)));
}

TEST(SeverityRank, ObstructionOrderPutsObstructedFirst) {
  const auto order = SeverityOrder::obstruction_default();
  EXPECT_EQ(order.rank(index_of(ObstructionClass::kObstructed)), 0u);
  EXPECT_EQ(order.rank(index_of(ObstructionClass::kNonObstructed)), 1u);
}

TEST(Adjacency, DefaultMapEdges) {
  const auto adj = AdjacencyMap::surface_default();
  EXPECT_TRUE(is_adjacent(SurfaceClass::kSnow, SurfaceClass::kSevereSnow, adj));
  EXPECT_FALSE(is_adjacent(SurfaceClass::kDry, SurfaceClass::kSevereSnow, adj));
  EXPECT_TRUE(is_adjacent(SurfaceClass::kPoorVisibility, SurfaceClass::kWet, adj));
  EXPECT_TRUE(is_adjacent(SurfaceClass::kWet, SurfaceClass::kDry, adj));
  EXPECT_FALSE(is_adjacent(SurfaceClass::kSnow, SurfaceClass::kDry, adj));
}

TEST(Adjacency, SymmetricAndIrreflexive) {
  const auto adj = AdjacencyMap::surface_default();
  for (std::size_t a = 0; a < kNumSurfaceClasses; ++a) {
    EXPECT_FALSE(adj.contains(a, a));
    for (std::size_t b = 0; b < kNumSurfaceClasses; ++b) EXPECT_EQ(adj.contains(a, b), adj.contains(b, a));
  }
  EXPECT_THROW(is_adjacent(SurfaceClass::kWet, SurfaceClass::kWet, adj), std::invalid_argument);
}

TEST(Adjacency, RejectsAsymmetricEdges) {
  std::array<std::array<bool, kNumSurfaceClasses>, kNumSurfaceClasses> edges{};
  edges[0][1] = true;
  EXPECT_THROW(AdjacencyMap{edges}, std::invalid_argument);
  edges[1][1] = true;
  edges[1][0] = true;
  EXPECT_THROW(AdjacencyMap{edges}, std::invalid_argument);
}

TEST(ClassProbabilitiesTest, ValidatesSumAndRange) {
  EXPECT_NO_THROW(ClassProbabilities({0.1, 0.2, 0.3, 0.3, 0.1}));
  EXPECT_THROW(ClassProbabilities({0.1, 0.2, 0.3, 0.3, 0.2}), std::invalid_argument);
  EXPECT_THROW(ClassProbabilities({-0.1, 0.3, 0.3, 0.3, 0.2}), std::invalid_argument);
  const std::array<double, 5> w{1, 1, 2, 0, 0};
  const auto p = ClassProbabilities::normalized(w);
  EXPECT_DOUBLE_EQ(p[SurfaceClass::kWet], 0.5);
}

TEST(Labels, ParseAndClassify) {
  ASSERT_TRUE(parse_label("wet").has_value());
  EXPECT_TRUE(is_surface(*parse_label("wet")));
  ASSERT_TRUE(parse_label("obstructed").has_value());
  EXPECT_TRUE(is_obstructed(*parse_label("obstructed")));
  EXPECT_FALSE(parse_label("slush").has_value());
  for (SurfaceClass c : kAllSurfaceClasses) EXPECT_EQ(parse_surface_class(to_string(c)), c);
}

TEST(Timestamps, ZoneDesignatorRequiredAndResolvedToUtc) {
  EXPECT_FALSE(parse_timestamp("2022-01-03T14:37:00").has_value());
  const auto z = parse_timestamp("2022-01-03T14:37:00Z");
  const auto off = parse_timestamp("2022-01-03T09:37:00-05:00");
  ASSERT_TRUE(z && off);
  EXPECT_EQ(*z, *off);
  EXPECT_EQ(format_timestamp(*z), "2022-01-03T14:37:00Z");
}

TEST(Weather, RangeViolationsReported) {
  WeatherVector w{-5.0, 80.0, 3.0, 0.1, 0.5, 90.0};
  EXPECT_TRUE(w.violation().empty());
  w.rh2m_pct = 130.0;
  EXPECT_FALSE(w.violation().empty());
}

}  // namespace
}  // namespace roadcond
