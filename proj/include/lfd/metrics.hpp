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

#ifndef LFD_METRICS_HPP_
#define LFD_METRICS_HPP_

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
#include "lfd/shap.hpp"

namespace lfd {

struct BinningConfig {
  std::size_t shap_bin_count = 20;
  std::size_t feature_bin_count = 20;

  void validate() const {
    if (shap_bin_count < 2 || feature_bin_count < 2) {
      throw InputError("bin counts must be >= 2");
    }
  }
};

enum class Metric { kMagnitude, kConsistency, kContrast, kCorrelation, kOverall };

inline constexpr std::array<Metric, 5> kAllMetrics = {
    Metric::kMagnitude, Metric::kConsistency, Metric::kContrast, Metric::kCorrelation,
    Metric::kOverall};

inline std::string_view MetricName(Metric metric) {
  switch (metric) {
    case Metric::kMagnitude: return "magnitude";
    case Metric::kConsistency: return "consistency";
    case Metric::kContrast: return "contrast";
    case Metric::kCorrelation: return "correlation";
    case Metric::kOverall: return "overall";
  }
  return "";
}

inline Metric ParseMetric(std::string_view text) {
  for (Metric m : kAllMetrics) {
    if (MetricName(m) == text) return m;
  }
  throw InputError("unknown metric '" + std::string(text) + "'");
}

// Weights of magnitude, consistency, contrast and correlation in Overall.
using MetricWeights = std::array<double, 4>;
inline constexpr MetricWeights kDefaultWeights = {2.0, 1.0, 2.0, 1.0};

inline constexpr double kEntropyEpsilon = 1e-9;

// Quantile bin edges over the present values: edge j-1 is the value at
// sorted position floor(j * n / bins), j = 1..bins-1. A value's bin is the
// number of edges not above it, so equal values always share a bin.
class QuantileBinning {
 public:
  QuantileBinning(std::span<const double> values, std::size_t bins) {
    std::vector<double> sorted;
    sorted.reserve(values.size());
    for (double v : values) {
      if (!IsMissing(v)) sorted.push_back(v);
    }
    if (sorted.empty()) throw InputError("quantile binning: all values missing");
    std::sort(sorted.begin(), sorted.end());
    bins_ = bins;
    for (std::size_t j = 1; j < bins; ++j) edges_.push_back(sorted[j * sorted.size() / bins]);
  }

  std::size_t bin(double v) const {
    return static_cast<std::size_t>(std::upper_bound(edges_.begin(), edges_.end(), v) -
                                    edges_.begin());
  }
  std::size_t count() const { return bins_; }
  const std::vector<double>& edges() const { return edges_; }

 private:
  std::size_t bins_ = 0;
  std::vector<double> edges_;
};

// Equal-width bins over [lo, hi]; the top edge belongs to the last bin. A
// zero-width range puts everything in bin 0.
class EqualWidthBinning {
 public:
  EqualWidthBinning(double lo, double hi, std::size_t bins) : lo_(lo), hi_(hi), bins_(bins) {}

  static EqualWidthBinning Over(std::span<const double> values, std::size_t bins) {
    if (values.empty()) throw InputError("equal-width binning: empty input");
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    return EqualWidthBinning(*lo, *hi, bins);
  }

  std::size_t bin(double v) const {
    if (!(hi_ > lo_)) return 0;
    const double t = (v - lo_) / (hi_ - lo_) * static_cast<double>(bins_);
    if (!(t > 0.0)) return 0;
    return std::min(bins_ - 1, static_cast<std::size_t>(t));
  }
  double lower(std::size_t b) const {
    return lo_ + (hi_ - lo_) * static_cast<double>(b) / static_cast<double>(bins_);
  }
  double upper(std::size_t b) const {
    return b + 1 == bins_ ? hi_ : lo_ + (hi_ - lo_) * static_cast<double>(b + 1) /
                                            static_cast<double>(bins_);
  }
  double center(std::size_t b) const { return 0.5 * (lower(b) + upper(b)); }
  std::size_t count() const { return bins_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }

 private:
  double lo_;
  double hi_;
  std::size_t bins_;
};

namespace detail {

inline void CheckSameLength(std::span<const double> feature, std::span<const double> shap) {
  if (feature.size() != shap.size()) {
    throw InputError("feature and SHAP columns differ in length");
  }
}

// (feature, shap) pairs whose feature value is present.
struct PresentPairs {
  std::vector<double> feature;
  std::vector<double> shap;
};

inline PresentPairs Present(std::span<const double> feature, std::span<const double> shap) {
  CheckSameLength(feature, shap);
  PresentPairs out;
  for (std::size_t i = 0; i < feature.size(); ++i) {
    if (IsMissing(feature[i])) continue;
    out.feature.push_back(feature[i]);
    out.shap.push_back(shap[i]);
  }
  return out;
}

inline double Entropy(std::span<const std::size_t> counts) {
  double total = 0.0;
  for (std::size_t c : counts) total += static_cast<double>(c);
  if (total == 0.0) return 0.0;
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace detail

// Mean absolute attribution.
inline double Magnitude(std::span<const double> shap) {
  if (shap.empty()) throw InputError("magnitude: empty SHAP column");
  double sum = 0.0;
  for (double s : shap) sum += std::abs(s);
  return sum / static_cast<double>(shap.size());
}

// Inverse of the size-weighted mean entropy of quantile-binned feature
// values inside each equal-width SHAP bin, capped at 1/epsilon.
inline double Consistency(std::span<const double> feature, std::span<const double> shap,
                          const BinningConfig& cfg = {}) {
  cfg.validate();
  const auto pairs = detail::Present(feature, shap);
  if (pairs.feature.empty()) throw InputError("consistency: all feature values missing");
  const QuantileBinning fbins(pairs.feature, cfg.feature_bin_count);
  const auto sbins = EqualWidthBinning::Over(pairs.shap, cfg.shap_bin_count);
  std::vector<std::size_t> grid(cfg.shap_bin_count * cfg.feature_bin_count, 0);
  for (std::size_t i = 0; i < pairs.feature.size(); ++i) {
    grid[sbins.bin(pairs.shap[i]) * cfg.feature_bin_count + fbins.bin(pairs.feature[i])] += 1;
  }
  double weighted = 0.0;
  for (std::size_t b = 0; b < cfg.shap_bin_count; ++b) {
    const std::span<const std::size_t> counts(grid.data() + b * cfg.feature_bin_count,
                                              cfg.feature_bin_count);
    const double size = static_cast<double>(std::accumulate(counts.begin(), counts.end(),
                                                            std::size_t{0}));
    weighted += detail::Entropy(counts) * size;
  }
  const double mean = weighted / static_cast<double>(pairs.feature.size());
  return 1.0 / std::max(mean, kEntropyEpsilon);
}

// Base-2 Jensen-Shannon divergence between the binned feature distributions
// of rows with SHAP <= 0 and rows with SHAP > 0. Zero when either side is
// empty.
inline double Contrast(std::span<const double> feature, std::span<const double> shap,
                       const BinningConfig& cfg = {}) {
  cfg.validate();
  const auto pairs = detail::Present(feature, shap);
  if (pairs.feature.empty()) return 0.0;
  const QuantileBinning fbins(pairs.feature, cfg.feature_bin_count);
  std::vector<double> non_positive(cfg.feature_bin_count, 0.0);
  std::vector<double> positive(cfg.feature_bin_count, 0.0);
  double n_non_positive = 0.0, n_positive = 0.0;
  for (std::size_t i = 0; i < pairs.feature.size(); ++i) {
    const std::size_t b = fbins.bin(pairs.feature[i]);
    if (pairs.shap[i] > 0.0) {
      positive[b] += 1.0;
      n_positive += 1.0;
    } else {
      non_positive[b] += 1.0;
      n_non_positive += 1.0;
    }
  }
  if (n_positive == 0.0 || n_non_positive == 0.0) return 0.0;
  double jsd = 0.0;
  for (std::size_t b = 0; b < cfg.feature_bin_count; ++b) {
    const double p = non_positive[b] / n_non_positive;
    const double q = positive[b] / n_positive;
    const double mid = 0.5 * (p + q);
    if (p > 0.0) jsd += 0.5 * p * std::log2(p / mid);
    if (q > 0.0) jsd += 0.5 * q * std::log2(q / mid);
  }
  return std::clamp(jsd, 0.0, 1.0);
}

// |Pearson r| over rows with a present feature value; 0 when either column
// is constant.
inline double Correlation(std::span<const double> feature, std::span<const double> shap) {
  const auto pairs = detail::Present(feature, shap);
  const std::size_t n = pairs.feature.size();
  if (n < 2) return 0.0;
  auto constant = [](const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *lo == *hi;
  };
  if (constant(pairs.feature) || constant(pairs.shap)) return 0.0;
  const double mx = std::accumulate(pairs.feature.begin(), pairs.feature.end(), 0.0) /
                    static_cast<double>(n);
  const double my = std::accumulate(pairs.shap.begin(), pairs.shap.end(), 0.0) /
                    static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = pairs.feature[i] - mx;
    const double dy = pairs.shap[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return std::clamp(std::abs(sxy) / std::sqrt(sxx * syy), 0.0, 1.0);
}

struct FeatureProfile {
  std::string feature;
  double magnitude = 0.0;
  double consistency = 0.0;
  double contrast = 0.0;
  double correlation = 0.0;
  double overall = 0.0;
  std::array<double, 4> normalized{};  // magnitude, consistency, contrast, correlation
  std::array<int, 5> ranks{};          // indexed by Metric, 1 = most important

  double value(Metric metric) const {
    switch (metric) {
      case Metric::kMagnitude: return magnitude;
      case Metric::kConsistency: return consistency;
      case Metric::kContrast: return contrast;
      case Metric::kCorrelation: return correlation;
      case Metric::kOverall: return overall;
    }
    return 0.0;
  }
  int rank(Metric metric) const { return ranks[static_cast<std::size_t>(metric)]; }
};

// Min-max normalizes the four base metrics across features (a metric that is
// equal for every feature normalizes to 1), combines them with `weights`,
// and assigns the five rank orders. Ties rank by feature name.
inline void CompleteProfiles(std::vector<FeatureProfile>& profiles,
                             const MetricWeights& weights = kDefaultWeights) {
  if (profiles.empty()) return;
  for (std::size_t k = 0; k < 4; ++k) {
    const Metric metric = kAllMetrics[k];
    double lo = profiles.front().value(metric), hi = lo;
    for (const auto& p : profiles) {
      lo = std::min(lo, p.value(metric));
      hi = std::max(hi, p.value(metric));
    }
    for (auto& p : profiles) {
      p.normalized[k] = hi > lo ? (p.value(metric) - lo) / (hi - lo) : 1.0;
    }
  }
  for (auto& p : profiles) {
    p.overall = 0.0;
    for (std::size_t k = 0; k < 4; ++k) p.overall += weights[k] * p.normalized[k];
  }
  std::vector<std::size_t> order(profiles.size());
  for (Metric metric : kAllMetrics) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double va = profiles[a].value(metric), vb = profiles[b].value(metric);
      if (va != vb) return va > vb;
      return profiles[a].feature < profiles[b].feature;
    });
    for (std::size_t r = 0; r < order.size(); ++r) {
      profiles[order[r]].ranks[static_cast<std::size_t>(metric)] = static_cast<int>(r + 1);
    }
  }
}

inline FeatureProfile ProfileFeature(std::string name, std::span<const double> feature,
                                     std::span<const double> shap, const BinningConfig& cfg) {
  FeatureProfile p;
  p.feature = std::move(name);
  p.magnitude = Magnitude(shap);
  p.consistency = Consistency(feature, shap, cfg);
  p.contrast = Contrast(feature, shap, cfg);
  p.correlation = Correlation(feature, shap);
  return p;
}

// Profiles every feature of one discriminator side, returned in Overall
// order. `features` rows must align with `shap` rows; columns are matched by
// name.
inline std::vector<FeatureProfile> RankFeatures(const ShapMatrix& shap,
                                                const MetaFeatureTable& features,
                                                const BinningConfig& cfg = {},
                                                const MetricWeights& weights = kDefaultWeights) {
  cfg.validate();
  if (features.rows() != shap.rows) {
    throw InputError("rank_features: SHAP and feature tables cover different instances");
  }
  if (shap.cols == 0) throw InputError("rank_features: no features");
  std::vector<FeatureProfile> profiles;
  profiles.reserve(shap.cols);
  for (std::size_t j = 0; j < shap.cols; ++j) {
    const auto col = features.index_of(shap.feature_names[j]);
    if (!col) {
      throw InputError("rank_features: feature '" + shap.feature_names[j] + "' not in table");
    }
    profiles.push_back(
        ProfileFeature(shap.feature_names[j], features.column(*col), shap.column(j), cfg));
  }
  CompleteProfiles(profiles, weights);
  std::sort(profiles.begin(), profiles.end(), [](const auto& a, const auto& b) {
    return a.rank(Metric::kOverall) < b.rank(Metric::kOverall);
  });
  return profiles;
}

inline std::vector<FeatureProfile> OrderBy(std::vector<FeatureProfile> profiles, Metric metric) {
  std::sort(profiles.begin(), profiles.end(),
            [&](const auto& a, const auto& b) { return a.rank(metric) < b.rank(metric); });
  return profiles;
}

inline std::vector<std::string> TopK(const std::vector<FeatureProfile>& profiles, Metric metric,
                                     std::size_t k) {
  const auto ordered = OrderBy(profiles, metric);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < std::min(k, ordered.size()); ++i) {
    names.push_back(ordered[i].feature);
  }
  return names;
}

inline nlohmann::json ToJson(const FeatureProfile& p) {
  nlohmann::json ranks, normalized;
  for (Metric m : kAllMetrics) ranks[std::string(MetricName(m))] = p.rank(m);
  for (std::size_t k = 0; k < 4; ++k) {
    normalized[std::string(MetricName(kAllMetrics[k]))] = p.normalized[k];
  }
  return {{"feature", p.feature},         {"magnitude", p.magnitude},
          {"consistency", p.consistency}, {"contrast", p.contrast},
          {"correlation", p.correlation}, {"overall", p.overall},
          {"normalized", normalized},     {"ranks", ranks}};
}

inline nlohmann::json ToJson(const std::vector<FeatureProfile>& profiles) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : profiles) out.push_back(ToJson(p));
  return out;
}

}  // namespace lfd

#endif  // LFD_METRICS_HPP_
