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

#ifndef LFD_DISAGREEMENT_HPP_
#define LFD_DISAGREEMENT_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lfd/dataset.hpp"
#include "lfd/error.hpp"

namespace lfd {

struct CaptureResult {
  double threshold = 0.0;
  double cutoff_a = 0.0;
  double cutoff_b = 0.0;
  std::vector<std::size_t> captured_a;  // ascending
  std::vector<std::size_t> captured_b;  // ascending
};

enum class Cell { kBoth, kAOnly, kBOnly };
enum class Side { kTp, kFp };

inline std::string_view CellName(Cell cell) {
  switch (cell) {
    case Cell::kBoth: return "both";
    case Cell::kAOnly: return "a_only";
    case Cell::kBOnly: return "b_only";
  }
  return "";
}

inline std::string_view SideName(Side side) { return side == Side::kTp ? "tp" : "fp"; }

inline Side ParseSide(std::string_view text) {
  if (text == "tp") return Side::kTp;
  if (text == "fp") return Side::kFp;
  throw InputError("unknown side '" + std::string(text) + "' (expected tp or fp)");
}

// Captured instances joined into A+B+, A+B-, A-B+, each split by true label.
// All index lists are ascending.
struct DisagreementCells {
  std::vector<std::size_t> both;
  std::vector<std::size_t> a_only;
  std::vector<std::size_t> b_only;
  std::array<std::vector<std::size_t>, 3> tp;  // indexed by Cell
  std::array<std::vector<std::size_t>, 3> fp;

  const std::vector<std::size_t>& cell(Cell c) const {
    switch (c) {
      case Cell::kBoth: return both;
      case Cell::kAOnly: return a_only;
      case Cell::kBOnly: return b_only;
    }
    return both;
  }
  const std::vector<std::size_t>& cell(Cell c, Side s) const {
    return (s == Side::kTp ? tp : fp)[static_cast<std::size_t>(c)];
  }
};

// Number of instances captured per model: ceil(threshold * n). The product
// is rounded to 1e-9 first so that e.g. 0.15 * 10000 captures 1500.
inline std::size_t CaptureCount(double threshold, std::size_t n) {
  const double raw = threshold * static_cast<double>(n);
  const double snapped = std::round(raw);
  const double exact = std::abs(raw - snapped) <= 1e-9 * std::max(1.0, raw) ? snapped : raw;
  return std::min(n, static_cast<std::size_t>(std::ceil(exact)));
}

namespace detail {

inline void CheckThreshold(double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw InputError("threshold must lie in (0,1], got " + std::to_string(threshold));
  }
}

// Indices ordered by score descending, index ascending among ties.
inline std::vector<std::size_t> DescendingOrder(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return scores[x] > scores[y]; });
  return order;
}

// rank[i] = position of instance i in DescendingOrder.
inline std::vector<std::size_t> Ranks(std::span<const double> scores) {
  const auto order = DescendingOrder(scores);
  std::vector<std::size_t> rank(order.size());
  for (std::size_t p = 0; p < order.size(); ++p) rank[order[p]] = p;
  return rank;
}

}  // namespace detail

inline CaptureResult Capture(const ScoredDataset& d, double threshold) {
  detail::CheckThreshold(threshold);
  const std::size_t n = d.size();
  const std::size_t k = CaptureCount(threshold, n);
  CaptureResult result;
  result.threshold = threshold;
  auto take = [&](const std::vector<double>& scores, double& cutoff,
                  std::vector<std::size_t>& captured) {
    const auto order = detail::DescendingOrder(scores);
    captured.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    cutoff = k == 0 ? 1.0 : scores[order[k - 1]];
    std::sort(captured.begin(), captured.end());
  };
  take(d.scores_a, result.cutoff_a, result.captured_a);
  take(d.scores_b, result.cutoff_b, result.captured_b);
  return result;
}

inline DisagreementCells JoinCells(const CaptureResult& capture, std::span<const int> labels) {
  DisagreementCells cells;
  const auto& a = capture.captured_a;
  const auto& b = capture.captured_b;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(cells.both));
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(cells.a_only));
  std::set_difference(b.begin(), b.end(), a.begin(), a.end(), std::back_inserter(cells.b_only));
  for (Cell c : {Cell::kBoth, Cell::kAOnly, Cell::kBOnly}) {
    const auto slot = static_cast<std::size_t>(c);
    for (std::size_t i : cells.cell(c)) {
      if (i >= labels.size()) throw InputError("capture index outside label range");
      (labels[i] == 1 ? cells.tp : cells.fp)[slot].push_back(i);
    }
  }
  return cells;
}

// Six cell sizes at one threshold, plus the realized cutoffs.
struct CellSizes {
  double threshold = 0.0;
  double cutoff_a = 0.0;
  double cutoff_b = 0.0;
  std::array<std::size_t, 3> tp{};  // indexed by Cell
  std::array<std::size_t, 3> fp{};
};

inline std::vector<double> DefaultGrid() {
  std::vector<double> grid(100);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = static_cast<double>(i + 1) / 100.0;
  return grid;
}

inline std::vector<CellSizes> DistributionCurve(const ScoredDataset& d,
                                                std::span<const double> grid) {
  if (grid.empty()) throw InputError("distribution grid is empty");
  for (std::size_t g = 0; g < grid.size(); ++g) {
    detail::CheckThreshold(grid[g]);
    if (g > 0 && !(grid[g] > grid[g - 1])) {
      throw InputError("distribution grid must be strictly increasing");
    }
  }
  const std::size_t n = d.size();
  const auto order_a = detail::DescendingOrder(d.scores_a);
  const auto order_b = detail::DescendingOrder(d.scores_b);
  std::vector<std::size_t> rank_a(n), rank_b(n);
  for (std::size_t p = 0; p < n; ++p) {
    rank_a[order_a[p]] = p;
    rank_b[order_b[p]] = p;
  }
  std::vector<CellSizes> curve;
  curve.reserve(grid.size());
  for (double t : grid) {
    const std::size_t k = CaptureCount(t, n);
    CellSizes sizes;
    sizes.threshold = t;
    sizes.cutoff_a = k == 0 ? 1.0 : d.scores_a[order_a[k - 1]];
    sizes.cutoff_b = k == 0 ? 1.0 : d.scores_b[order_b[k - 1]];
    for (std::size_t i = 0; i < n; ++i) {
      const bool in_a = rank_a[i] < k;
      const bool in_b = rank_b[i] < k;
      if (!in_a && !in_b) continue;
      const Cell c = in_a && in_b ? Cell::kBoth : (in_a ? Cell::kAOnly : Cell::kBOnly);
      (d.labels[i] == 1 ? sizes.tp : sizes.fp)[static_cast<std::size_t>(c)] += 1;
    }
    curve.push_back(sizes);
  }
  return curve;
}

inline nlohmann::json ToJson(const CaptureResult& c) {
  return {{"threshold", c.threshold},
          {"cutoff_a", c.cutoff_a},
          {"cutoff_b", c.cutoff_b},
          {"captured_a", c.captured_a.size()},
          {"captured_b", c.captured_b.size()}};
}

inline nlohmann::json ToJson(const DisagreementCells& cells) {
  nlohmann::json out;
  for (Cell c : {Cell::kBoth, Cell::kAOnly, Cell::kBOnly}) {
    const std::string name(CellName(c));
    out[name] = cells.cell(c);
    out[name + "_tp"] = cells.cell(c, Side::kTp);
    out[name + "_fp"] = cells.cell(c, Side::kFp);
  }
  return out;
}

// Columnar form: one size array per cell/side, aligned with "thresholds".
inline nlohmann::json ToJson(const std::vector<CellSizes>& curve) {
  nlohmann::json out;
  std::vector<double> thresholds, cut_a, cut_b;
  std::array<std::vector<std::size_t>, 6> series;
  for (const auto& s : curve) {
    thresholds.push_back(s.threshold);
    cut_a.push_back(s.cutoff_a);
    cut_b.push_back(s.cutoff_b);
    for (std::size_t c = 0; c < 3; ++c) {
      series[c].push_back(s.tp[c]);
      series[3 + c].push_back(s.fp[c]);
    }
  }
  out["thresholds"] = thresholds;
  out["cutoff_a"] = cut_a;
  out["cutoff_b"] = cut_b;
  for (Cell c : {Cell::kBoth, Cell::kAOnly, Cell::kBOnly}) {
    const auto slot = static_cast<std::size_t>(c);
    out[std::string(CellName(c)) + "_tp"] = series[slot];
    out[std::string(CellName(c)) + "_fp"] = series[3 + slot];
  }
  return out;
}

}  // namespace lfd

#endif  // LFD_DISAGREEMENT_HPP_
