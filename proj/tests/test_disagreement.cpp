/*
 * Copyright 2026 The LFD Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "lfd/disagreement.hpp"
#include "lfd/random.hpp"

namespace lfd {
namespace {

ScoredDataset Make(std::vector<double> a, std::vector<double> b, std::vector<int> labels) {
  ScoredDataset d;
  for (std::size_t i = 0; i < a.size(); ++i) d.ids.push_back("r" + std::to_string(i));
  d.scores_a = std::move(a);
  d.scores_b = std::move(b);
  d.labels = std::move(labels);
  d.features = MetaFeatureTable({"f"}, d.ids.size(), std::vector<double>(d.ids.size(), 0.0));
  return d;
}

// Pairwise definition: i is captured iff fewer than k instances precede it.
std::vector<std::size_t> OracleCapture(const std::vector<double>& s, std::size_t k) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::size_t ahead = 0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (s[j] > s[i] || (s[j] == s[i] && j < i)) ++ahead;
    }
    if (ahead < k) out.push_back(i);
  }
  return out;
}

TEST(Disagreement, CaptureCount) {
  EXPECT_EQ(CaptureCount(0.15, 10000), 1500u);
  EXPECT_EQ(CaptureCount(0.3, 10), 3u);
  EXPECT_EQ(CaptureCount(0.25, 10), 3u);
  EXPECT_EQ(CaptureCount(0.01, 10), 1u);
  EXPECT_EQ(CaptureCount(1.0, 7), 7u);
  EXPECT_EQ(CaptureCount(0.07, 100), 7u);
}

TEST(Disagreement, HandFixture) {
  //            0    1    2    3    4    5    6    7    8    9
  const auto d = Make({.95, .90, .85, .10, .20, .30, .40, .50, .60, .05},
                      {.10, .20, .90, .95, .85, .30, .40, .50, .60, .05},
                      {1, 0, 1, 1, 0, 0, 1, 0, 1, 0});
  const CaptureResult c = Capture(d, 0.3);
  EXPECT_EQ(c.captured_a, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(c.captured_b, (std::vector<std::size_t>{2, 3, 4}));
  EXPECT_DOUBLE_EQ(c.cutoff_a, 0.85);
  EXPECT_DOUBLE_EQ(c.cutoff_b, 0.85);
  const DisagreementCells cells = JoinCells(c, d.labels);
  EXPECT_EQ(cells.both, std::vector<std::size_t>{2});
  EXPECT_EQ(cells.a_only, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(cells.b_only, (std::vector<std::size_t>{3, 4}));
  EXPECT_EQ(cells.cell(Cell::kAOnly, Side::kTp), std::vector<std::size_t>{0});
  EXPECT_EQ(cells.cell(Cell::kAOnly, Side::kFp), std::vector<std::size_t>{1});
  EXPECT_EQ(cells.cell(Cell::kBOnly, Side::kTp), std::vector<std::size_t>{3});
  EXPECT_EQ(cells.cell(Cell::kBOnly, Side::kFp), std::vector<std::size_t>{4});
  EXPECT_EQ(cells.cell(Cell::kBoth, Side::kTp), std::vector<std::size_t>{2});
}

TEST(Disagreement, TiesBreakByIndex) {
  const auto d = Make({.5, .5, .5, .5}, {.5, .5, .5, .5}, {1, 0, 1, 0});
  const CaptureResult c = Capture(d, 0.5);
  EXPECT_EQ(c.captured_a, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(c.captured_b, (std::vector<std::size_t>{0, 1}));
  EXPECT_TRUE(JoinCells(c, d.labels).a_only.empty());
}

TEST(Disagreement, MatchesPairwiseOracleWithTies) {
  Rng rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 5 + rng.below(60);
    std::vector<double> a(n), b(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<double>(rng.below(8)) / 8.0;  // heavy ties
      b[i] = rng.uniform();
      y[i] = rng.bernoulli(0.4) ? 1 : 0;
    }
    const auto d = Make(a, b, y);
    const double t = 0.05 + 0.9 * rng.uniform();
    const std::size_t k = CaptureCount(t, n);
    const CaptureResult c = Capture(d, t);
    EXPECT_EQ(c.captured_a, OracleCapture(a, k));
    EXPECT_EQ(c.captured_b, OracleCapture(b, k));
    const DisagreementCells cells = JoinCells(c, y);
    EXPECT_EQ(cells.both.size() + cells.a_only.size(), k);
    EXPECT_EQ(cells.both.size() + cells.b_only.size(), k);
    for (Cell cell : {Cell::kBoth, Cell::kAOnly, Cell::kBOnly}) {
      EXPECT_EQ(cells.cell(cell, Side::kTp).size() + cells.cell(cell, Side::kFp).size(),
                cells.cell(cell).size());
      for (std::size_t i : cells.cell(cell, Side::kTp)) EXPECT_EQ(y[i], 1);
      for (std::size_t i : cells.cell(cell, Side::kFp)) EXPECT_EQ(y[i], 0);
    }
  }
}

TEST(Disagreement, CurveMatchesPointwiseCapture) {
  Rng rng(11);
  const std::size_t n = 157;
  std::vector<double> a(n), b(n);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = rng.uniform();
    b[i] = 0.5 * a[i] + 0.5 * rng.uniform();
    y[i] = rng.bernoulli(0.3) ? 1 : 0;
  }
  const auto d = Make(a, b, y);
  const auto grid = DefaultGrid();
  ASSERT_EQ(grid.size(), 100u);
  const auto curve = DistributionCurve(d, grid);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const CaptureResult c = Capture(d, grid[g]);
    const DisagreementCells cells = JoinCells(c, y);
    EXPECT_DOUBLE_EQ(curve[g].cutoff_a, c.cutoff_a);
    EXPECT_DOUBLE_EQ(curve[g].cutoff_b, c.cutoff_b);
    for (Cell cell : {Cell::kBoth, Cell::kAOnly, Cell::kBOnly}) {
      const auto slot = static_cast<std::size_t>(cell);
      EXPECT_EQ(curve[g].tp[slot], cells.cell(cell, Side::kTp).size());
      EXPECT_EQ(curve[g].fp[slot], cells.cell(cell, Side::kFp).size());
    }
  }
  // Everything captured by both at t = 1.
  const auto& last = curve.back();
  EXPECT_EQ(last.tp[0] + last.fp[0], n);
  EXPECT_EQ(last.tp[1] + last.fp[1] + last.tp[2] + last.fp[2], 0u);
  const auto j = ToJson(curve);
  EXPECT_EQ(j["thresholds"].size(), 100u);
  EXPECT_EQ(j["a_only_tp"].size(), 100u);
}

TEST(Disagreement, RejectsBadThresholds) {
  const auto d = Make({.1, .2}, {.2, .1}, {0, 1});
  for (double t : {0.0, -0.1, 1.5, std::nan("")}) {
    EXPECT_THROW(Capture(d, t), Error);
  }
  const std::vector<double> bad{0.5, 0.4};
  EXPECT_THROW(DistributionCurve(d, bad), Error);
  EXPECT_THROW(ParseSide("tn"), Error);
}

}  // namespace
}  // namespace lfd
