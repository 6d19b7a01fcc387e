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

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "lfd/metrics.hpp"
#include "lfd/random.hpp"
#include "lfd/shap.hpp"

namespace lfd {
namespace {

// Independent re-implementations, written from the metric definitions.
namespace oracle {

std::vector<std::size_t> QuantileBins(const std::vector<double>& v, std::size_t bins) {
  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> out;
  for (double x : v) {
    std::size_t b = 0;
    for (std::size_t j = 1; j < bins; ++j) b += sorted[j * sorted.size() / bins] <= x;
    out.push_back(b);
  }
  return out;
}

std::vector<std::size_t> WidthBins(const std::vector<double>& v, std::size_t bins) {
  const double lo = *std::min_element(v.begin(), v.end());
  const double hi = *std::max_element(v.begin(), v.end());
  std::vector<std::size_t> out;
  for (double x : v) {
    if (hi == lo) {
      out.push_back(0);
      continue;
    }
    const double t = std::floor((x - lo) / (hi - lo) * static_cast<double>(bins));
    out.push_back(static_cast<std::size_t>(std::clamp(t, 0.0, static_cast<double>(bins - 1))));
  }
  return out;
}

double Consistency(const std::vector<double>& f, const std::vector<double>& s, std::size_t fb,
                   std::size_t sb) {
  const auto qf = QuantileBins(f, fb);
  const auto ws = WidthBins(s, sb);
  std::map<std::size_t, std::map<std::size_t, double>> cells;
  for (std::size_t i = 0; i < f.size(); ++i) cells[ws[i]][qf[i]] += 1.0;
  double h = 0.0;
  for (const auto& [bin, counts] : cells) {
    double size = 0.0;
    for (const auto& [k, c] : counts) size += c;
    double e = 0.0;
    for (const auto& [k, c] : counts) e -= c / size * std::log(c / size);
    h += size / static_cast<double>(f.size()) * e;
  }
  return 1.0 / std::max(h, 1e-9);
}

double Contrast(const std::vector<double>& f, const std::vector<double>& s, std::size_t fb) {
  const auto qf = QuantileBins(f, fb);
  std::vector<double> p(fb, 0.0), q(fb, 0.0);
  double np = 0.0, nq = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (s[i] > 0.0) {
      q[qf[i]] += 1.0;
      nq += 1.0;
    } else {
      p[qf[i]] += 1.0;
      np += 1.0;
    }
  }
  if (np == 0.0 || nq == 0.0) return 0.0;
  auto kl = [](const std::vector<double>& a, const std::vector<double>& m) {
    double d = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (a[k] > 0.0) d += a[k] * std::log(a[k] / m[k]);
    }
    return d;
  };
  std::vector<double> m(fb);
  for (std::size_t k = 0; k < fb; ++k) {
    p[k] /= np;
    q[k] /= nq;
    m[k] = 0.5 * (p[k] + q[k]);
  }
  return (0.5 * kl(p, m) + 0.5 * kl(q, m)) / std::log(2.0);
}

double Correlation(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return std::abs(sxy / std::sqrt(sxx * syy));
}

}  // namespace oracle

TEST(Metrics, MatchIndependentImplementations) {
  Rng rng(1234);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 20 + rng.below(400);
    std::vector<double> f(n), s(n);
    const bool discrete = rng.bernoulli(0.3);
    for (std::size_t i = 0; i < n; ++i) {
      f[i] = discrete ? static_cast<double>(rng.below(6)) : rng.normal();
      s[i] = 0.7 * f[i] + rng.normal() * rng.uniform();
      if (rng.bernoulli(0.1)) s[i] = 0.0;
    }
    BinningConfig cfg;
    cfg.feature_bin_count = 2 + rng.below(25);
    cfg.shap_bin_count = 2 + rng.below(25);
    double mag = 0.0;
    for (double v : s) mag += std::abs(v);
    EXPECT_NEAR(Magnitude(s), mag / static_cast<double>(n), 1e-12);
    EXPECT_NEAR(Consistency(f, s, cfg),
                oracle::Consistency(f, s, cfg.feature_bin_count, cfg.shap_bin_count), 1e-12);
    EXPECT_NEAR(Contrast(f, s, cfg), oracle::Contrast(f, s, cfg.feature_bin_count), 1e-12);
    EXPECT_NEAR(Correlation(f, s), oracle::Correlation(f, s), 1e-12);
  }
}

TEST(Metrics, ContrastIdentities) {
  std::vector<double> f, s;
  // Identical conditionals: every value appears once on each side.
  for (int v = 0; v < 40; ++v) {
    f.push_back(v);
    s.push_back(-1.0);
    f.push_back(v);
    s.push_back(1.0);
  }
  EXPECT_NEAR(Contrast(f, s), 0.0, 1e-12);
  // Disjoint supports.
  f.clear();
  s.clear();
  for (int v = 0; v < 40; ++v) {
    f.push_back(v);
    s.push_back(v < 20 ? -0.5 : 0.5);
  }
  EXPECT_NEAR(Contrast(f, s), 1.0, 1e-12);
  // One-sided SHAP.
  const std::vector<double> pos(40, 0.3);
  EXPECT_EQ(Contrast(f, pos), 0.0);
}

TEST(Metrics, ConsistencyUniformTwo) {
  std::vector<double> f, s;
  for (int i = 0; i < 100; ++i) {
    f.push_back(i % 2);
    s.push_back(0.25);
  }
  EXPECT_NEAR(Consistency(f, s), 1.0 / std::log(2.0), 1e-9);
  // Perfect purity saturates at the epsilon cap.
  const std::vector<double> same(100, 1.0);
  EXPECT_NEAR(Consistency(same, s), 1e9, 1e-3);
}

TEST(Metrics, CorrelationFixtures) {
  const std::vector<double> a{1, 2, 3, 4}, b{1, 3, 2, 4};
  EXPECT_NEAR(Correlation(a, b), 0.8, 1e-15);
  std::vector<double> x, y;
  for (int i = 0; i < 30; ++i) {
    x.push_back(i * 0.37);
    y.push_back(-4.0 * i * 0.37 + 2.0);
  }
  EXPECT_NEAR(Correlation(x, y), 1.0, 1e-12);
  const std::vector<double> flat(4, 2.0);
  EXPECT_EQ(Correlation(a, flat), 0.0);
}

TEST(Metrics, MissingFeatureRowsAreSkipped) {
  const std::vector<double> f{1, kMissing, 3, 4, kMissing};
  const std::vector<double> s{1, 100, 2, 4, -50};
  const std::vector<double> f2{1, 3, 4};
  const std::vector<double> s2{1, 2, 4};
  EXPECT_DOUBLE_EQ(Correlation(f, s), Correlation(f2, s2));
  BinningConfig cfg{4, 4};
  EXPECT_DOUBLE_EQ(Contrast(f, s, cfg), Contrast(f2, s2, cfg));
  EXPECT_DOUBLE_EQ(Consistency(f, s, cfg), Consistency(f2, s2, cfg));
}

ShapMatrix Matrix(const std::vector<std::vector<double>>& columns,
                  const std::vector<std::string>& names) {
  ShapMatrix m;
  m.rows = columns[0].size();
  m.cols = columns.size();
  m.values.resize(m.rows * m.cols);
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) m.at(i, j) = columns[j][i];
  }
  m.feature_names = names;
  for (std::size_t i = 0; i < m.rows; ++i) m.instances.push_back(i);
  return m;
}

TEST(Metrics, OverallNormalizationAndTies) {
  Rng rng(8);
  const std::size_t n = 200;
  std::vector<double> fa(n), fb(n), fc(n), sa(n), sb(n), sc(n);
  for (std::size_t i = 0; i < n; ++i) {
    fa[i] = rng.uniform();
    fb[i] = rng.uniform();
    fc[i] = rng.uniform();
    sa[i] = fa[i] - 0.5;
    sb[i] = 0.1 * (fb[i] - 0.5) + 0.05 * rng.normal();
    sc[i] = 0.0;
  }
  std::vector<double> values;
  for (std::size_t i = 0; i < n; ++i) {
    values.push_back(fa[i]);
    values.push_back(fb[i]);
    values.push_back(fc[i]);
  }
  const MetaFeatureTable table({"a", "b", "c"}, n, values);
  const auto profiles = RankFeatures(Matrix({sa, sb, sc}, {"a", "b", "c"}), table);
  ASSERT_EQ(profiles.size(), 3u);
  EXPECT_EQ(profiles[0].feature, "a");
  for (const auto& p : profiles) {
    double overall = 0.0;
    for (std::size_t k = 0; k < 4; ++k) overall += kDefaultWeights[k] * p.normalized[k];
    EXPECT_NEAR(p.overall, overall, 1e-15);
    for (double v : p.normalized) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_EQ(profiles[0].normalized[0], 1.0);
  EXPECT_EQ(profiles[2].feature, "c");
  EXPECT_EQ(profiles[2].magnitude, 0.0);

  // Identical columns tie on every metric and rank by name.
  const MetaFeatureTable twins({"zeta", "alpha"}, n, [&] {
    std::vector<double> v;
    for (std::size_t i = 0; i < n; ++i) {
      v.push_back(fa[i]);
      v.push_back(fa[i]);
    }
    return v;
  }());
  const auto tied = RankFeatures(Matrix({sa, sa}, {"zeta", "alpha"}), twins);
  EXPECT_EQ(tied[0].feature, "alpha");
  for (Metric m : kAllMetrics) EXPECT_EQ(tied[0].rank(m), 1);
  for (double v : tied[0].normalized) EXPECT_EQ(v, 1.0);

  EXPECT_EQ(TopK(profiles, Metric::kMagnitude, 2), (std::vector<std::string>{"a", "b"}));
  const auto by_corr = OrderBy(profiles, Metric::kCorrelation);
  for (std::size_t r = 0; r + 1 < by_corr.size(); ++r) {
    EXPECT_GE(by_corr[r].correlation, by_corr[r + 1].correlation);
  }
}

TEST(Metrics, Parsing) {
  for (Metric m : kAllMetrics) EXPECT_EQ(ParseMetric(MetricName(m)), m);
  EXPECT_THROW(ParseMetric("entropy"), Error);
  BinningConfig bad{1, 20};
  EXPECT_THROW(bad.validate(), Error);
}

}  // namespace
}  // namespace lfd
