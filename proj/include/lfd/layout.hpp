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

#ifndef LFD_LAYOUT_HPP_
#define LFD_LAYOUT_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lfd/dataset.hpp"
#include "lfd/error.hpp"
#include "lfd/metrics.hpp"
#include "lfd/random.hpp"

namespace lfd {

struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline std::string ToHex(const Rgb& c) {
  auto channel = [](double v) {
    return static_cast<int>(std::lround(std::clamp(v, 0.0, 255.0)));
  };
  char buffer[8];
  std::snprintf(buffer, sizeof(buffer), "#%02x%02x%02x", channel(c.r), channel(c.g), channel(c.b));
  return buffer;
}

inline Rgb ParseHex(std::string_view text) {
  if (text.size() != 7 || text[0] != '#') throw InputError("color must look like #rrggbb");
  auto channel = [&](std::size_t at) {
    int value = 0;
    for (std::size_t k = at; k < at + 2; ++k) {
      const char c = text[k];
      int digit;
      if (c >= '0' && c <= '9') {
        digit = c - '0';
      } else if (c >= 'a' && c <= 'f') {
        digit = c - 'a' + 10;
      } else if (c >= 'A' && c <= 'F') {
        digit = c - 'A' + 10;
      } else {
        throw InputError("color must look like #rrggbb");
      }
      value = value * 16 + digit;
    }
    return static_cast<double>(value);
  };
  return {channel(1), channel(3), channel(5)};
}

inline constexpr Rgb kBlue{31.0, 119.0, 180.0};
inline constexpr Rgb kOrange{255.0, 127.0, 14.0};

// Piecewise-linear RGB color map over feature values; clamps outside the
// control range.
class TransferFunction {
 public:
  struct ControlPoint {
    double value = 0.0;
    Rgb color;
  };

  explicit TransferFunction(std::vector<ControlPoint> points) : points_(std::move(points)) {
    if (points_.size() < 2) throw InputError("transfer function needs at least 2 control points");
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (!std::isfinite(points_[i].value)) {
        throw InputError("transfer function control values must be finite");
      }
      if (i > 0 && !(points_[i].value > points_[i - 1].value)) {
        throw InputError("transfer function control values must be strictly increasing");
      }
    }
  }

  // Blue at `lo`, orange at `hi`.
  static TransferFunction Default(double lo, double hi) {
    if (!(hi > lo)) {
      lo -= 0.5;
      hi = lo + 1.0;
    }
    return TransferFunction({{lo, kBlue}, {hi, kOrange}});
  }

  static TransferFunction DefaultFor(std::span<const double> values) {
    double lo = 0.0, hi = 0.0;
    bool any = false;
    for (double v : values) {
      if (IsMissing(v)) continue;
      lo = any ? std::min(lo, v) : v;
      hi = any ? std::max(hi, v) : v;
      any = true;
    }
    return Default(lo, hi);
  }

  // "value:#rrggbb,value:#rrggbb,..."
  static TransferFunction Parse(std::string_view text) {
    std::vector<ControlPoint> points;
    while (!text.empty()) {
      const auto comma = text.find(',');
      const std::string_view item = text.substr(0, comma);
      const auto colon = item.find(':');
      if (colon == std::string_view::npos) throw InputError("transfer function: expected value:#rrggbb");
      const auto value = detail::ParseDouble(item.substr(0, colon));
      if (!value) throw InputError("transfer function: bad control value");
      points.push_back({*value, ParseHex(detail::Trim(item.substr(colon + 1)))});
      if (comma == std::string_view::npos) break;
      text.remove_prefix(comma + 1);
    }
    return TransferFunction(std::move(points));
  }

  Rgb operator()(double value) const {
    if (value <= points_.front().value) return points_.front().color;
    if (value >= points_.back().value) return points_.back().color;
    const auto upper = std::upper_bound(points_.begin(), points_.end(), value,
                                        [](double v, const ControlPoint& p) { return v < p.value; });
    const auto lower = upper - 1;
    const double t = (value - lower->value) / (upper->value - lower->value);
    const Rgb& a = lower->color;
    const Rgb& b = upper->color;
    return {a.r + t * (b.r - a.r), a.g + t * (b.g - a.g), a.b + t * (b.b - a.b)};
  }

  const std::vector<ControlPoint>& points() const { return points_; }

 private:
  std::vector<ControlPoint> points_;
};

// Mapping of SHAP values to plot x-coordinates and counts to radii.
struct BubbleScale {
  double width = 600.0;
  double radius_per_sqrt_count = 1.5;
  double r_min = 2.0;
  double r_max = 20.0;
};

struct Bubble {
  std::size_t shap_bin = 0;
  std::size_t feature_bin = 0;
  double shap = 0.0;   // SHAP-bin center
  double value = 0.0;  // feature-bin representative (mean of its values)
  std::size_t count = 0;
  double radius = 0.0;
  bool clipped = false;
  double target_x = 0.0;
  double x = 0.0;
  double y = 0.0;
  Rgb color;
  std::vector<std::size_t> members;  // row positions in the input columns
};

struct Histogram2d {
  std::vector<Bubble> bubbles;  // by shap bin, then feature bin
  std::size_t missing = 0;
  std::size_t clipped = 0;
  double shap_lo = 0.0;
  double shap_hi = 0.0;
};

inline double BubbleRadius(std::size_t count, const BubbleScale& scale, bool* clipped = nullptr) {
  const double raw = scale.radius_per_sqrt_count * std::sqrt(static_cast<double>(count));
  const double r = std::clamp(raw, scale.r_min, scale.r_max);
  if (clipped) *clipped = r != raw;
  return r;
}

namespace detail {

inline double PlotX(double shap, double lo, double hi, double width) {
  if (!(hi > lo)) return width / 2.0;
  return (shap - lo) / (hi - lo) * width;
}

}  // namespace detail

// Non-empty cells of the (SHAP bin x feature bin) histogram as bubbles.
// Rows with a missing feature value are excluded and counted.
inline Histogram2d MakeHistogram2d(std::span<const double> feature, std::span<const double> shap,
                                   const BinningConfig& cfg, const TransferFunction& tf,
                                   const BubbleScale& scale = {}) {
  cfg.validate();
  if (feature.empty()) throw InputError("histogram2d: empty input");
  if (feature.size() != shap.size()) throw InputError("histogram2d: column lengths differ");
  Histogram2d out;
  std::vector<std::size_t> present;
  std::vector<double> present_shap;
  for (std::size_t i = 0; i < feature.size(); ++i) {
    if (IsMissing(feature[i])) {
      ++out.missing;
    } else {
      present.push_back(i);
      present_shap.push_back(shap[i]);
    }
  }
  if (present.empty()) return out;
  const QuantileBinning fbins(feature, cfg.feature_bin_count);
  const auto sbins = EqualWidthBinning::Over(present_shap, cfg.shap_bin_count);
  out.shap_lo = sbins.lo();
  out.shap_hi = sbins.hi();

  std::vector<double> rep_sum(cfg.feature_bin_count, 0.0);
  std::vector<std::size_t> rep_count(cfg.feature_bin_count, 0);
  std::vector<std::vector<std::size_t>> cells(cfg.shap_bin_count * cfg.feature_bin_count);
  for (std::size_t i : present) {
    const std::size_t fb = fbins.bin(feature[i]);
    rep_sum[fb] += feature[i];
    rep_count[fb] += 1;
    cells[sbins.bin(shap[i]) * cfg.feature_bin_count + fb].push_back(i);
  }
  for (std::size_t sb = 0; sb < cfg.shap_bin_count; ++sb) {
    for (std::size_t fb = 0; fb < cfg.feature_bin_count; ++fb) {
      auto& members = cells[sb * cfg.feature_bin_count + fb];
      if (members.empty()) continue;
      Bubble b;
      b.shap_bin = sb;
      b.feature_bin = fb;
      b.shap = sbins.center(sb);
      b.value = rep_sum[fb] / static_cast<double>(rep_count[fb]);
      b.count = members.size();
      b.radius = BubbleRadius(b.count, scale, &b.clipped);
      out.clipped += b.clipped;
      b.target_x = detail::PlotX(b.shap, out.shap_lo, out.shap_hi, scale.width);
      b.x = b.target_x;
      b.y = 0.0;
      b.color = tf(b.value);
      b.members = std::move(members);
      out.bubbles.push_back(std::move(b));
    }
  }
  return out;
}

enum class PackingMode { kCirclePacking, kForceDirected };

inline PackingMode ParsePackingMode(std::string_view text) {
  if (text == "circle" || text == "circle-packing") return PackingMode::kCirclePacking;
  if (text == "force" || text == "force-directed") return PackingMode::kForceDirected;
  throw InputError("unknown packing mode '" + std::string(text) + "'");
}

struct PackResult {
  std::vector<Bubble> bubbles;  // input order
  double mean_distortion = 0.0;  // mean |x - target_x|
  double max_overlap = 0.0;      // worst overlap / smaller radius
};

// Worst pairwise overlap as a fraction of the smaller radius (0 if none).
inline double MaxOverlapRatio(std::span<const Bubble> bubbles) {
  double worst = 0.0;
  for (std::size_t i = 0; i < bubbles.size(); ++i) {
    for (std::size_t j = i + 1; j < bubbles.size(); ++j) {
      const double dx = bubbles[i].x - bubbles[j].x;
      const double dy = bubbles[i].y - bubbles[j].y;
      const double overlap = bubbles[i].radius + bubbles[j].radius - std::hypot(dx, dy);
      if (overlap > 0.0) {
        worst = std::max(worst, overlap / std::min(bubbles[i].radius, bubbles[j].radius));
      }
    }
  }
  return worst;
}

namespace detail {

// Placement order: count descending, then target x ascending.
inline std::vector<std::size_t> PlacementOrder(std::span<const Bubble> bubbles) {
  std::vector<std::size_t> order(bubbles.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (bubbles[a].count != bubbles[b].count) return bubbles[a].count > bubbles[b].count;
    return bubbles[a].target_x < bubbles[b].target_x;
  });
  return order;
}

// Sequential tangent placement keeping every bubble at its exact target x:
// each bubble takes the lowest-|y| slot on its vertical line that touches
// at most tangentially the bubbles already placed.
inline void CirclePack(std::vector<Bubble>& bubbles) {
  std::vector<std::size_t> placed;
  for (std::size_t i : PlacementOrder(bubbles)) {
    Bubble& b = bubbles[i];
    b.x = b.target_x;
    std::vector<std::size_t> near;
    for (std::size_t j : placed) {
      if (std::abs(bubbles[j].x - b.x) < bubbles[j].radius + b.radius) near.push_back(j);
    }
    std::vector<double> candidates{0.0};
    for (std::size_t j : near) {
      const double reach = bubbles[j].radius + b.radius;
      const double dx = bubbles[j].x - b.x;
      const double h = std::sqrt(std::max(0.0, reach * reach - dx * dx));
      candidates.push_back(bubbles[j].y + h);
      candidates.push_back(bubbles[j].y - h);
    }
    std::stable_sort(candidates.begin(), candidates.end(), [](double p, double q) {
      if (std::abs(p) != std::abs(q)) return std::abs(p) < std::abs(q);
      return p > q;
    });
    double chosen = candidates.back();
    for (double y : candidates) {
      bool free = true;
      for (std::size_t j : near) {
        const double reach = bubbles[j].radius + b.radius;
        if (std::hypot(bubbles[j].x - b.x, bubbles[j].y - y) < reach * (1.0 - 1e-9)) {
          free = false;
          break;
        }
      }
      if (free) {
        chosen = y;
        break;
      }
    }
    b.y = chosen;
    placed.push_back(i);
  }
}

// Pushes overlapping pairs apart along their center line. Returns whether
// any pair moved.
inline bool SeparatePass(std::vector<Bubble>& bubbles, std::span<const std::size_t> order) {
  bool moved = false;
  for (std::size_t a = 0; a < order.size(); ++a) {
    for (std::size_t c = a + 1; c < order.size(); ++c) {
      Bubble& p = bubbles[order[a]];
      Bubble& q = bubbles[order[c]];
      // Pairs are pushed slightly past tangency so that they settle.
      const double need = (p.radius + q.radius) * (1.0 + 1e-6);
      double dx = q.x - p.x;
      double dy = q.y - p.y;
      double dist = std::hypot(dx, dy);
      if (dist >= p.radius + q.radius) continue;
      if (dist == 0.0) {
        // Coincident centers: split vertically, larger index upward.
        dx = 0.0;
        dy = 1.0;
        dist = 1.0;
        const double push = need / 2.0;
        p.y -= push;
        q.y += push;
      } else {
        const double push = (need - dist) / 2.0;
        p.x -= dx / dist * push;
        p.y -= dy / dist * push;
        q.x += dx / dist * push;
        q.y += dy / dist * push;
      }
      moved = true;
    }
  }
  return moved;
}

// Springs pull bubbles toward (target_x, 0) while pairwise collision
// resolution removes overlap.
inline void ForceDirected(std::vector<Bubble>& bubbles, std::uint64_t seed) {
  Rng rng(seed);
  const auto order = PlacementOrder(bubbles);
  for (std::size_t i : order) {
    bubbles[i].x = bubbles[i].target_x;
    bubbles[i].y = (rng.uniform() - 0.5) * bubbles[i].radius;
  }
  constexpr int kIterations = 300;
  for (int it = 0; it < kIterations; ++it) {
    const double cooling = 1.0 - static_cast<double>(it) / kIterations;
    for (auto& b : bubbles) {
      b.x += 0.1 * cooling * (b.target_x - b.x);
      b.y -= 0.05 * cooling * b.y;
    }
    for (int pass = 0; pass < 4; ++pass) {
      if (!SeparatePass(bubbles, order)) break;
    }
  }
  for (int pass = 0; pass < 10000; ++pass) {
    if (!SeparatePass(bubbles, order)) break;
  }
}

}  // namespace detail

// Positions bubbles without overlap while keeping x close to the SHAP
// position. Counts, radii and colors are untouched.
inline PackResult PackBubbles(std::vector<Bubble> bubbles, PackingMode mode,
                              std::uint64_t seed = 42) {
  if (mode == PackingMode::kForceDirected) {
    detail::ForceDirected(bubbles, seed);
    if (MaxOverlapRatio(bubbles) > 0.005) detail::CirclePack(bubbles);
  } else {
    detail::CirclePack(bubbles);
  }
  PackResult result;
  result.max_overlap = MaxOverlapRatio(bubbles);
  double distortion = 0.0;
  for (const auto& b : bubbles) distortion += std::abs(b.x - b.target_x);
  result.mean_distortion =
      bubbles.empty() ? 0.0 : distortion / static_cast<double>(bubbles.size());
  result.bubbles = std::move(bubbles);
  return result;
}

struct AreaRect {
  std::size_t feature_bin = 0;
  double value = 0.0;
  std::size_t height = 0;
  Rgb color;
};

struct AreaColumn {
  double shap0 = 0.0;
  double shap1 = 0.0;
  std::size_t height = 0;
  Rgb color;
  std::vector<AreaRect> rects;  // feature bins ascending, heights sum to `height`
};

// Stacked-rectangle columns over equal-width SHAP bins. Column color is the
// count-weighted mean of tf(feature value) over its instances; empty bins
// yield zero-height white columns.
inline std::vector<AreaColumn> AreaPlot(std::span<const double> feature,
                                        std::span<const double> shap, std::size_t shap_bins,
                                        const TransferFunction& tf,
                                        std::size_t feature_bins = 20) {
  if (feature.empty()) throw InputError("area_plot: empty input");
  if (feature.size() != shap.size()) throw InputError("area_plot: column lengths differ");
  if (shap_bins < 1 || feature_bins < 1) throw InputError("area_plot: bin counts must be >= 1");
  std::vector<std::size_t> present;
  std::vector<double> present_shap;
  for (std::size_t i = 0; i < feature.size(); ++i) {
    if (!IsMissing(feature[i])) {
      present.push_back(i);
      present_shap.push_back(shap[i]);
    }
  }
  if (present.empty()) return {};
  const QuantileBinning fbins(feature, feature_bins);
  const auto sbins = EqualWidthBinning::Over(present_shap, shap_bins);

  std::vector<double> rep_sum(feature_bins, 0.0);
  std::vector<std::size_t> rep_count(feature_bins, 0);
  for (std::size_t i : present) {
    const std::size_t fb = fbins.bin(feature[i]);
    rep_sum[fb] += feature[i];
    rep_count[fb] += 1;
  }

  std::vector<AreaColumn> columns(shap_bins);
  std::vector<std::vector<std::size_t>> stacks(shap_bins, std::vector<std::size_t>(feature_bins, 0));
  std::vector<double> weight(shap_bins, 0.0);
  for (std::size_t b = 0; b < shap_bins; ++b) {
    columns[b].shap0 = sbins.lower(b);
    columns[b].shap1 = sbins.upper(b);
    columns[b].color = {255.0, 255.0, 255.0};
  }
  for (std::size_t i : present) {
    const std::size_t b = sbins.bin(shap[i]);
    AreaColumn& col = columns[b];
    const Rgb c = tf(feature[i]);
    // Running weighted mean: identical inputs reproduce their color exactly.
    weight[b] += 1.0;
    if (col.height == 0) {
      col.color = c;
    } else {
      const double t = 1.0 / weight[b];
      col.color = {col.color.r + (c.r - col.color.r) * t, col.color.g + (c.g - col.color.g) * t,
                   col.color.b + (c.b - col.color.b) * t};
    }
    col.height += 1;
    stacks[b][fbins.bin(feature[i])] += 1;
  }
  for (std::size_t b = 0; b < shap_bins; ++b) {
    for (std::size_t fb = 0; fb < feature_bins; ++fb) {
      if (stacks[b][fb] == 0) continue;
      const double rep = rep_sum[fb] / static_cast<double>(rep_count[fb]);
      columns[b].rects.push_back({fb, rep, stacks[b][fb], tf(rep)});
    }
  }
  return columns;
}

// Bubbles whose representative feature value lies in [lo, hi].
inline std::vector<Bubble> BrushSelect(std::span<const Bubble> bubbles, double lo, double hi) {
  if (!(lo <= hi)) throw InputError("brush interval is inverted");
  std::vector<Bubble> out;
  for (const auto& b : bubbles) {
    if (b.value >= lo && b.value <= hi) out.push_back(b);
  }
  return out;
}

inline nlohmann::json ToJson(const Rgb& c) { return ToHex(c); }

inline nlohmann::json ToJson(const Bubble& b) {
  return {{"x", b.x},           {"y", b.y},       {"r", b.radius},
          {"count", b.count},   {"value", b.value}, {"color", ToHex(b.color)},
          {"shap", b.shap},     {"target_x", b.target_x}, {"clipped", b.clipped}};
}

inline nlohmann::json ToJson(const AreaColumn& c) {
  nlohmann::json rects = nlohmann::json::array();
  for (const auto& r : c.rects) {
    rects.push_back({{"value", r.value}, {"height", r.height}, {"color", ToHex(r.color)}});
  }
  return {{"shap0", c.shap0},
          {"shap1", c.shap1},
          {"height", c.height},
          {"color", ToHex(c.color)},
          {"rects", rects}};
}

inline nlohmann::json ToJson(const std::vector<Bubble>& bubbles) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& b : bubbles) out.push_back(ToJson(b));
  return out;
}

inline nlohmann::json ToJson(const std::vector<AreaColumn>& columns) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& c : columns) out.push_back(ToJson(c));
  return out;
}

inline nlohmann::json ToJson(const TransferFunction& tf) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : tf.points()) out.push_back({{"value", p.value}, {"color", ToHex(p.color)}});
  return out;
}

// Headless rendering of a packed bubble plot above its area plot.
inline std::string RenderSvg(std::string_view title, std::span<const Bubble> bubbles,
                             std::span<const AreaColumn> columns, const BubbleScale& scale = {}) {
  const double margin = 30.0;
  double top = 0.0, bottom = 0.0;
  for (const auto& b : bubbles) {
    top = std::max(top, b.y + b.radius);
    bottom = std::min(bottom, b.y - b.radius);
  }
  const double bubble_height = top - bottom;
  const double area_height = 120.0;
  std::size_t tallest = 1;
  for (const auto& c : columns) tallest = std::max(tallest, c.height);
  const double width = scale.width + 2.0 * margin;
  const double height = bubble_height + area_height + 3.0 * margin;

  std::ostringstream svg;
  svg.precision(6);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\">\n";
  std::string escaped;
  for (char c : title) {
    if (c == '<') {
      escaped += "&lt;";
    } else if (c == '&') {
      escaped += "&amp;";
    } else {
      escaped += c;
    }
  }
  svg << "<text x=\"" << margin << "\" y=\"18\" font-size=\"13\">" << escaped << "</text>\n";
  const double origin_y = margin + top;
  for (const auto& b : bubbles) {
    svg << "<circle cx=\"" << margin + b.x << "\" cy=\"" << origin_y - b.y << "\" r=\""
        << b.radius << "\" fill=\"" << ToHex(b.color) << "\" stroke=\"#333333\" stroke-width=\"0.5\"/>\n";
  }
  if (!columns.empty()) {
    const double base = margin * 2.0 + bubble_height + area_height;
    const double column_width = scale.width / static_cast<double>(columns.size());
    for (std::size_t k = 0; k < columns.size(); ++k) {
      const double h = area_height * static_cast<double>(columns[k].height) /
                       static_cast<double>(tallest);
      if (h <= 0.0) continue;
      svg << "<rect x=\"" << margin + column_width * static_cast<double>(k) << "\" y=\""
          << base - h << "\" width=\"" << column_width << "\" height=\"" << h << "\" fill=\""
          << ToHex(columns[k].color) << "\"/>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace lfd

#endif  // LFD_LAYOUT_HPP_
